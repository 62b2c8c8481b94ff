"""
Receding-horizon closed loop: at every sample the controller updates its
program with the measured state and the scheduled reference, solves, and
the first predicted input is applied to the plant.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Protocol, Sequence, TextIO, Tuple, Union

import numpy as np

from core.ball_plate import (
    DEFAULT_SUBSTEPS,
    N_INPUT,
    N_STATE,
    POSITION_INDICES,
    VELOCITY_INDICES,
    BallPlateParams,
    plant_step,
)
from core.conic_solver import AdmmSolver, ConeProgram, SolverConfig, SolverStatus
from core.errors import DimensionError, IncompatibleScheduleError, InfeasibleReferenceError
from core.formulations import (
    ControllerKind,
    DecodedSolution,
    FormulationConfig,
    WeightSet,
    build_program,
    decode,
    encode,
    shift_solution,
    update_parameters,
    warm_start_from,
)
from core.harmonic import evaluate
from core.logger import get_logger
from core.lti import LtiModel, SteadyStatePair, output_violation, require_valid_model
from core.reachable import ReachableResult, optimal_reachable_for, reachable_distance

logger = get_logger(__name__)

SETTLING_THRESHOLD = 0.01
# Budget multiplier for resuming a solve that stopped at max_iter.
RETRY_BUDGET_FACTOR = 4

Payload = Union[SteadyStatePair, Tuple[SteadyStatePair, ...]]


@dataclass(frozen=True, eq=False)
class ScheduleSegment:
    start: int
    payload: Payload

    def __post_init__(self):
        if not isinstance(self.payload, SteadyStatePair):
            object.__setattr__(self, "payload", tuple(self.payload))

    @property
    def periodic(self) -> bool:
        return not isinstance(self.payload, SteadyStatePair)


@dataclass(frozen=True, eq=False)
class ReferenceSchedule:
    """
    Piecewise reference. A periodic payload is indexed by absolute time:
    x_r(t) = payload[t mod T_p].
    """
    segments: Tuple[ScheduleSegment, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ValueError("schedule needs at least one segment")
        if segments[0].start != 0:
            raise ValueError(f"first segment must start at 0, got {segments[0].start}")
        starts = [s.start for s in segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"segment starts must be strictly increasing, got {starts}")
        kinds = {s.periodic for s in segments}
        if len(kinds) > 1:
            raise IncompatibleScheduleError("schedule mixes steady and periodic payloads")
        if segments[0].periodic:
            periods = {len(s.payload) for s in segments}
            if len(periods) > 1:
                raise IncompatibleScheduleError(
                    f"periodic payloads must share one period, got {sorted(periods)}"
                )
            if min(periods) < 2:
                raise ValueError("periodic payloads need at least 2 pairs")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, payload: Payload) -> "ReferenceSchedule":
        return cls((ScheduleSegment(0, payload),))

    @property
    def periodic(self) -> bool:
        return self.segments[0].periodic

    @property
    def period(self) -> Optional[int]:
        return len(self.segments[0].payload) if self.periodic else None

    def segment_index(self, t: int) -> int:
        index = 0
        for i, segment in enumerate(self.segments):
            if segment.start <= t:
                index = i
        return index

    def segment_at(self, t: int) -> ScheduleSegment:
        return self.segments[self.segment_index(t)]

    def reference_at(self, t: int) -> SteadyStatePair:
        payload = self.segment_at(t).payload
        if isinstance(payload, SteadyStatePair):
            return payload
        return payload[t % len(payload)]

    def window_at(self, t: int) -> Tuple[SteadyStatePair, ...]:
        """The T_p pairs x_r(t), ..., x_r(t + T_p - 1) of the segment active at t."""
        payload = self.segment_at(t).payload
        if isinstance(payload, SteadyStatePair):
            raise IncompatibleScheduleError("steady schedule has no periodic window")
        T_p = len(payload)
        return tuple(payload[(t + j) % T_p] for j in range(T_p))


class Plant(Protocol):
    n_x: int
    n_u: int

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...


class LinearPlant:
    """The prediction model itself: the nominal case."""

    def __init__(self, model: LtiModel):
        self.model = model
        self.n_x, self.n_u = model.n_x, model.n_u

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.model.step(x, u)


class BallPlatePlant:
    """Nonlinear ball-and-plate dynamics integrated with RK4 over each sample."""

    def __init__(self, params: BallPlateParams = BallPlateParams(), substeps: int = DEFAULT_SUBSTEPS):
        self.params = params
        self.substeps = substeps
        self.n_x, self.n_u = N_STATE, N_INPUT

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return plant_step(x, u, self.params, self.substeps)


class TrackingController:
    """
    One controller instance: builds its program on the first call and
    afterwards only updates parameters, so the solver keeps its KKT
    factorization. Warm starts use the shifted previous solution.
    """

    def __init__(
        self,
        kind: ControllerKind,
        model: LtiModel,
        weights: WeightSet,
        cfg: FormulationConfig,
        solver_cfg: SolverConfig = SolverConfig(),
    ):
        self.kind = ControllerKind(kind)
        self.model = model
        self.weights = weights
        self.cfg = cfg
        self.solver_cfg = solver_cfg
        self.program: Optional[ConeProgram] = None
        self._solver: Optional[AdmmSolver] = None
        self._last: Optional[DecodedSolution] = None

    def check_schedule(self, schedule: ReferenceSchedule) -> None:
        if (self.kind == ControllerKind.PERIODIC) != schedule.periodic:
            raise IncompatibleScheduleError(
                f"{self.kind.value} controller cannot follow a "
                f"{'periodic' if schedule.periodic else 'steady'} schedule"
            )
        if self.kind == ControllerKind.PERIODIC and schedule.period != self.cfg.T_p:
            raise IncompatibleScheduleError(
                f"schedule period {schedule.period} differs from controller period T_p={self.cfg.T_p}"
            )

    def reference_for(self, t: int, schedule: ReferenceSchedule):
        if self.kind == ControllerKind.PERIODIC:
            return schedule.window_at(t)
        return schedule.reference_at(t)

    def solve(self, state: np.ndarray, ref) -> Tuple[Optional[DecodedSolution], SolverStatus, int]:
        """
        Solve for the current sample. A solve that hits max_iter is resumed
        once with RETRY_BUDGET_FACTOR times the budget; if it is still
        inexact the shifted previous plan is applied instead, and only a
        first-sample solve without a previous plan falls back to the
        inexact iterate.
        """
        if self.program is None:
            self.program = build_program(self.kind, self.model, self.weights, self.cfg, state, ref)
            self._solver = AdmmSolver(self.program, self.solver_cfg)
        else:
            self.program = update_parameters(self.program, state, ref)
            self._solver.load(self.program)

        warm = warm_start_from(self.program, self._last) if self._last is not None else None
        result = self._solver.solve(warm)
        iterations = result.iterations
        if result.status == SolverStatus.MAX_ITER_REACHED:
            result = self._solver.solve(result, max_iter=self.solver_cfg.max_iter * RETRY_BUDGET_FACTOR)
            iterations += result.iterations
        if result.status == SolverStatus.PRIMAL_INFEASIBLE:
            self._last = None
            return None, result.status, iterations
        if result.status == SolverStatus.MAX_ITER_REACHED:
            if self._last is not None:
                logger.warning(f"[SIMULATOR] {self.kind.value}: max_iter reached twice; applying the shifted previous plan")
                shifted = shift_solution(self._last)
                decoded = replace(
                    shifted,
                    status=SolverStatus.MAX_ITER_REACHED,
                    cost=self.program.objective(encode(self.program, shifted)),
                )
                self._last = decoded
                return decoded, result.status, iterations
            logger.warning(f"[SIMULATOR] {self.kind.value}: no previous plan; inexact solve applied")
        decoded = decode(self.program, result, self.kind, allow_inexact=True)
        self._last = decoded
        return decoded, result.status, iterations


@dataclass(frozen=True, eq=False)
class SimulationStep:
    time: int
    state: np.ndarray
    input: np.ndarray
    status: SolverStatus
    iterations: int
    artificial_ref: Optional[SteadyStatePair]
    stage_cost: float
    optimal_cost: float
    distance: float


@dataclass(eq=False)
class SimulationTrace:
    kind: ControllerKind
    steps: List[SimulationStep] = field(default_factory=list)
    final_state: Optional[np.ndarray] = None
    aborted: bool = False
    abort_reason: Optional[str] = None
    targets: List[Optional[ReachableResult]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> np.ndarray:
        return np.array([s.state for s in self.steps])

    @property
    def inputs(self) -> np.ndarray:
        return np.array([s.input for s in self.steps])

    @property
    def infeasible_count(self) -> int:
        return sum(s.status == SolverStatus.PRIMAL_INFEASIBLE for s in self.steps) + int(self.aborted)


def _current_artificial(decoded: DecodedSolution, ref_pair: SteadyStatePair) -> SteadyStatePair:
    """Artificial reference evaluated at the current sample (k = 0)."""
    art = decoded.artificial_ref
    if decoded.kind == ControllerKind.EQUALITY:
        return ref_pair
    if decoded.kind == ControllerKind.MPCT:
        return art
    if decoded.kind == ControllerKind.PERIODIC:
        return art[0]
    x_h, u_h = art
    return SteadyStatePair(evaluate(x_h, 0), evaluate(u_h, 0))


def _stage_cost(weights: WeightSet, x: np.ndarray, u: np.ndarray, ref: SteadyStatePair) -> float:
    dx, du = x - ref.x, u - ref.u
    return float(dx @ weights.Q @ dx + du @ weights.R @ du)


def reachable_target(
    kind: ControllerKind,
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    payload: Payload,
) -> Optional[ReachableResult]:
    """Settling target for one schedule segment; None when no admissible reference exists."""
    try:
        return optimal_reachable_for(kind, model, weights, cfg, payload)
    except InfeasibleReferenceError as exc:
        logger.warning(f"[SIMULATOR] no reachable target for {ControllerKind(kind).value}: {exc}")
        return None


def _distance(target: Optional[ReachableResult], state: np.ndarray, t: int, ref: SteadyStatePair) -> float:
    if target is None:
        return float(np.linalg.norm(state - ref.x))
    return reachable_distance(target, state, t)


def initial_state_violation(model: LtiModel, x0: np.ndarray) -> float:
    """Largest violation of the output rows that do not involve the input (0 when x0 is valid)."""
    state_rows = ~np.any(model.F != 0, axis=1)
    y = model.E[state_rows] @ np.asarray(x0, dtype=float)
    over = np.maximum(y - model.y_hi[state_rows], model.y_lo[state_rows] - y)
    return float(max(0.0, np.max(over, initial=0.0)))


def run_closed_loop(
    kind: ControllerKind,
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    plant: Plant,
    schedule: ReferenceSchedule,
    x0,
    steps: int,
    solver_cfg: SolverConfig = SolverConfig(),
    with_targets: bool = True,
) -> SimulationTrace:
    """
    Simulate `steps` samples. A primal infeasibility certificate aborts the
    run (the trace is flagged). Solves that stay inexact after the retry
    apply the shifted previous plan; their status is recorded.
    """
    kind = ControllerKind(kind)
    require_valid_model(model)
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.shape != (model.n_x,):
        raise DimensionError(f"x0 must have length {model.n_x}, got {x.shape[0]}")
    if plant.n_x != model.n_x or plant.n_u != model.n_u:
        raise DimensionError(
            f"plant has n_x={plant.n_x}, n_u={plant.n_u} but model has n_x={model.n_x}, n_u={model.n_u}"
        )
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if initial_state_violation(model, x) > 1e-9:
        raise ValueError("initial state violates the state constraints")

    controller = TrackingController(kind, model, weights, cfg, solver_cfg)
    controller.check_schedule(schedule)

    targets = [
        reachable_target(kind, model, weights, cfg, segment.payload) if with_targets else None
        for segment in schedule.segments
    ]
    trace = SimulationTrace(kind=kind, targets=targets)
    logger.info(f"[SIMULATOR] {kind.value}: N={cfg.N} steps={steps} segments={len(schedule.segments)}")

    for t in range(steps):
        ref = controller.reference_for(t, schedule)
        decoded, status, iterations = controller.solve(x, ref)
        ref_pair = schedule.reference_at(t)
        target = targets[schedule.segment_index(t)]
        if decoded is None:
            trace.aborted = True
            trace.abort_reason = f"infeasible program at t={t}"
            logger.warning(f"[SIMULATOR] {kind.value}: aborting, {trace.abort_reason}")
            break

        u = decoded.first_input.copy()
        trace.steps.append(SimulationStep(
            time=t,
            state=x.copy(),
            input=u,
            status=status,
            iterations=iterations,
            artificial_ref=_current_artificial(decoded, ref_pair),
            stage_cost=_stage_cost(weights, x, u, ref_pair),
            optimal_cost=decoded.cost,
            distance=_distance(target, x, t, ref_pair),
        ))
        x = plant.step(x, u)

    trace.final_state = x
    return trace


@dataclass(frozen=True)
class ConvergenceMetrics:
    steps: int
    final_distance: float
    settling_step: Optional[int]
    max_constraint_violation: float
    peak_velocity: Tuple[float, ...]
    infeasible_solves: int
    last_period_mean_error: Optional[float] = None


def _position_error(target: Optional[ReachableResult], state: np.ndarray, t: int,
                    positions: Optional[Sequence[int]]) -> float:
    if target is None:
        return np.inf
    if target.kind == "periodic":
        goal = target.reference[t % len(target.reference)].x
    else:
        goal = target.center.x
    idx = list(positions) if positions is not None else slice(None)
    return float(np.max(np.abs(state[idx] - goal[idx])))


def convergence_metrics(
    trace: SimulationTrace,
    target: Optional[ReachableResult],
    model: LtiModel,
    threshold: float = SETTLING_THRESHOLD,
    position_indices: Optional[Sequence[int]] = POSITION_INDICES,
    velocity_indices: Sequence[int] = VELOCITY_INDICES,
) -> ConvergenceMetrics:
    """
    Summary of a trace against its settling target. The settling step is the
    first step from which the position error stays below `threshold`.
    """
    if not trace.steps:
        raise ValueError("trace is empty")
    states = trace.states
    n = len(trace.steps)

    errors = [_position_error(target, s.state, s.time, position_indices) for s in trace.steps]
    settling: Optional[int] = None
    for t in range(n - 1, -1, -1):
        if errors[t] >= threshold:
            break
        settling = t

    violation = max(output_violation(model, s.state, s.input) for s in trace.steps)
    peaks = tuple(float(np.max(np.abs(states[:, i]))) for i in velocity_indices)

    final_state = trace.final_state if trace.final_state is not None else states[-1]
    final_time = trace.steps[-1].time + 1
    final_distance = np.inf if target is None else reachable_distance(target, final_state, final_time)

    period_error = None
    if target is not None and target.kind == "periodic":
        T_p = len(target.reference)
        if n >= T_p:
            period_error = float(np.mean(errors[-T_p:]))

    return ConvergenceMetrics(
        steps=n,
        final_distance=final_distance,
        settling_step=settling,
        max_constraint_violation=float(violation),
        peak_velocity=peaks,
        infeasible_solves=trace.infeasible_count,
        last_period_mean_error=period_error,
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def trace_columns(n_x: int, n_u: int) -> List[str]:
    return (
        ["step"]
        + [f"x{i}" for i in range(n_x)]
        + [f"u{i}" for i in range(n_u)]
        + ["solver_status", "iterations"]
        + [f"artref_x{i}" for i in range(n_x)]
        + [f"artref_u{i}" for i in range(n_u)]
        + ["stage_cost", "dist_to_reachable"]
    )


def write_atomic(path: str, write: Callable[[TextIO], None]) -> None:
    """Write through a temp file in the target directory, then rename over `path`."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(trace: SimulationTrace, path: str, n_x: int, n_u: int) -> None:
    """One row per step, floats at 17 significant digits; written atomically."""

    def rows(fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_columns(n_x, n_u))
        for s in trace.steps:
            art = s.artificial_ref
            writer.writerow(
                [s.time]
                + [_fmt(v) for v in s.state]
                + [_fmt(v) for v in s.input]
                + [s.status.value, s.iterations]
                + [_fmt(v) for v in art.x]
                + [_fmt(v) for v in art.u]
                + [_fmt(s.stage_cost), _fmt(s.distance)]
            )

    write_atomic(path, rows)
