"""
Randomized property suites run by `trackmpc check`.

Each suite takes a SuiteContext (model, weights and horizon from the
scenario, a seed, sample counts) and returns one PropertyResult per
property. A suite never raises for the condition it checks; failures are
reported with the first counterexample found.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sparse

from core.conic_solver import ConeProgram, SolverConfig, SolverStatus, project_soc, solve
from core.errors import UnknownSuiteError
from core.formulations import ControllerKind, FormulationConfig, WeightSet
from core.harmonic import (
    DEFAULT_ORACLE_HORIZON,
    HarmonicParams,
    harmonic_state_from_input,
    is_admissible_harmonic,
    is_degenerate_frequency,
    output_params,
    shift_harmonic,
)
from core.logger import get_logger
from core.lti import LtiModel, SteadyStatePair, output_violation
from core.reachable import (
    ORACLE_SOLVER,
    optimal_reachable_harmonic,
    optimal_reachable_steady,
)
from core.simulator import (
    LinearPlant,
    ReferenceSchedule,
    ScheduleSegment,
    TrackingController,
    initial_state_violation,
    run_closed_loop,
)
from models.report_types import PropertyResult, SuiteReport

logger = get_logger(__name__)

DEFAULT_RUNS = 50
DEFAULT_STEPS = 100
DEFAULT_SWITCH_EVERY = 20
MAX_INITIAL_ATTEMPTS = 20

CONSTRAINT_TOL = 1e-6
EQUIVALENCE_INPUT_TOL = 1e-4
EQUIVALENCE_COST_TOL = 1e-6
HARMONIC_PART_TOL = 1e-6
CENTER_TOL = 1e-6
KKT_TOL = 1e-6
SOC_TOL = 1e-12
VIOLATION_MARGIN = 1e-3

# Sampling boxes, as multiples of the state bounds.
REFERENCE_SPREAD = 1.5
INITIAL_SPREAD = 0.1
ADMISSIBLE_SPREAD = 0.5

MAX_KKT_VARIABLES = 10
MAX_KKT_BOX_ROWS = 10


@dataclass(frozen=True, eq=False)
class SuiteContext:
    model: LtiModel
    weights: WeightSet
    formulation: FormulationConfig
    solver: SolverConfig = SolverConfig()
    seed: int = 0
    runs: Optional[int] = None
    steps: Optional[int] = None
    switch_every: Optional[int] = None
    samples: Optional[int] = None

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def option(self, name: str, default: int) -> int:
        value = getattr(self, name)
        return default if value is None else int(value)


def _state_scale(model: LtiModel) -> np.ndarray:
    """Per-state magnitude from single-state output rows; 1 where no row bounds the state."""
    scale = np.full(model.n_x, np.inf)
    for r in range(model.n_y):
        if np.any(model.F[r] != 0):
            continue
        nz = np.flatnonzero(model.E[r])
        if nz.size != 1:
            continue
        i = nz[0]
        bound = max(abs(model.y_lo[r]), abs(model.y_hi[r])) / abs(model.E[r, i])
        scale[i] = min(scale[i], bound)
    scale[~np.isfinite(scale)] = 1.0
    return scale


def _random_state(rng: np.random.Generator, scale: np.ndarray, spread: float) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, scale.shape[0]) * scale * spread


def _random_pair(rng: np.random.Generator, model: LtiModel, scale: np.ndarray, spread: float) -> SteadyStatePair:
    return SteadyStatePair(_random_state(rng, scale, spread), np.zeros(model.n_u))


def _random_window(rng: np.random.Generator, model: LtiModel, scale: np.ndarray, T_p: int) -> Tuple[SteadyStatePair, ...]:
    center = _random_state(rng, scale, REFERENCE_SPREAD)
    amplitude = _random_state(rng, scale, REFERENCE_SPREAD)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return tuple(
        SteadyStatePair(center + amplitude * np.sin(2.0 * np.pi * j / T_p + phase), np.zeros(model.n_u))
        for j in range(T_p)
    )


def _random_schedule(rng, kind: ControllerKind, ctx: SuiteContext, scale: np.ndarray,
                     steps: int, every: int) -> ReferenceSchedule:
    segments = []
    for start in range(0, steps, every):
        if kind == ControllerKind.PERIODIC:
            payload = _random_window(rng, ctx.model, scale, ctx.formulation.T_p)
        else:
            payload = _random_pair(rng, ctx.model, scale, REFERENCE_SPREAD)
        segments.append(ScheduleSegment(start, payload))
    return ReferenceSchedule(tuple(segments))


def _stage_weights(ctx: SuiteContext) -> WeightSet:
    return WeightSet(ctx.weights.Q, ctx.weights.R, T=ctx.weights.Q, S=ctx.weights.R)


def _fallback_state(ctx: SuiteContext, schedule: ReferenceSchedule) -> np.ndarray:
    """An admissible steady state: feasible for every tracking controller."""
    first = schedule.reference_at(0)
    return optimal_reachable_steady(ctx.model, _stage_weights(ctx), ctx.formulation.sigma, first).reference.x


def _harmonic_frequency(cfg: FormulationConfig) -> float:
    if cfg.w is None or is_degenerate_frequency(cfg.w):
        raise ValueError("this suite needs a non-degenerate controller.frequency")
    return cfg.w


def _recursive_feasibility(kind: ControllerKind, ctx: SuiteContext) -> List[PropertyResult]:
    cfg = ctx.formulation
    if kind == ControllerKind.PERIODIC and cfg.T_p is None:
        raise ValueError("recursive_feasibility_periodic needs controller.period")
    if kind == ControllerKind.HMPC and cfg.w is None:
        raise ValueError("recursive_feasibility_hmpc needs controller.frequency")

    rng = ctx.rng()
    runs = ctx.option("runs", DEFAULT_RUNS)
    steps = ctx.option("steps", DEFAULT_STEPS)
    every = ctx.option("switch_every", DEFAULT_SWITCH_EVERY)
    model = ctx.model
    scale = _state_scale(model)
    plant = LinearPlant(model)

    infeasible, rejected = 0, 0
    worst_violation = 0.0
    counterexample = None
    violation_example = None
    for run in range(runs):
        schedule = _random_schedule(rng, kind, ctx, scale, steps, every)
        trace, x0 = None, None
        for _ in range(MAX_INITIAL_ATTEMPTS):
            candidate = _random_state(rng, scale, INITIAL_SPREAD)
            if initial_state_violation(model, candidate) > 0:
                rejected += 1
                continue
            trace = run_closed_loop(kind, model, ctx.weights, cfg, plant, schedule, candidate, steps,
                                    ctx.solver, with_targets=False)
            if trace.steps:
                x0 = candidate
                break
            rejected += 1
        if x0 is None:
            x0 = _fallback_state(ctx, schedule)
            trace = run_closed_loop(kind, model, ctx.weights, cfg, plant, schedule, x0, steps,
                                    ctx.solver, with_targets=False)

        if trace.aborted:
            infeasible += 1
            if counterexample is None:
                counterexample = {"run": run, "x0": x0.tolist(), "reason": trace.abort_reason}
        for s in trace.steps:
            v = output_violation(model, s.state, s.input)
            if v > worst_violation:
                worst_violation = v
                if v > CONSTRAINT_TOL and violation_example is None:
                    violation_example = {"run": run, "step": s.time, "state": s.state.tolist(),
                                         "input": s.input.tolist(), "violation": v}
        logger.debug(f"[SUITE] {kind.value} run {run}: steps={len(trace)} aborted={trace.aborted}",
                     extra={"console": False})

    return [
        PropertyResult(
            name="no_infeasible_solves",
            passed=infeasible == 0,
            detail=f"{infeasible} infeasible of {runs} runs",
            measurements={"runs": runs, "infeasible_runs": infeasible, "rejected_initial_states": rejected},
            counterexample=counterexample,
        ),
        PropertyResult(
            name="constraints_satisfied",
            passed=worst_violation <= CONSTRAINT_TOL,
            detail=f"max output violation {worst_violation:.3e}",
            measurements={"max_violation": worst_violation},
            counterexample=violation_example,
        ),
    ]


def recursive_feasibility_mpct(ctx: SuiteContext) -> List[PropertyResult]:
    return _recursive_feasibility(ControllerKind.MPCT, ctx)


def recursive_feasibility_periodic(ctx: SuiteContext) -> List[PropertyResult]:
    return _recursive_feasibility(ControllerKind.PERIODIC, ctx)


def recursive_feasibility_hmpc(ctx: SuiteContext) -> List[PropertyResult]:
    return _recursive_feasibility(ControllerKind.HMPC, ctx)


def hmpc_mpct_equivalence_w2pi(ctx: SuiteContext) -> List[PropertyResult]:
    """HMPC at w = 2*pi with T_e = T, S_e = S solves the same problem as MPCT."""
    rng = ctx.rng()
    model, cfg = ctx.model, ctx.formulation
    samples = ctx.option("samples", 20)
    T, S = ctx.weights.resolved("T"), ctx.weights.resolved("S")
    matched = WeightSet(ctx.weights.Q, ctx.weights.R, T=T, S=S, T_e=T, S_e=S,
                        T_h=np.diag(np.diag(T)), S_h=np.diag(np.diag(S)))
    mpct_cfg = FormulationConfig(cfg.N, cfg.sigma)
    hmpc_cfg = FormulationConfig(cfg.N, cfg.sigma, w=2.0 * np.pi)
    scale = _state_scale(model)

    checked, attempts = 0, 0
    max_input_dev, max_cost_dev = 0.0, 0.0
    counterexample = None
    while checked < samples and attempts < samples * MAX_INITIAL_ATTEMPTS:
        attempts += 1
        x = _random_state(rng, scale, INITIAL_SPREAD)
        ref = _random_pair(rng, model, scale, REFERENCE_SPREAD)
        if initial_state_violation(model, x) > 0:
            continue
        mpct, _, _ = TrackingController(ControllerKind.MPCT, model, matched, mpct_cfg, ORACLE_SOLVER).solve(x, ref)
        if mpct is None:
            continue
        hmpc, status, _ = TrackingController(ControllerKind.HMPC, model, matched, hmpc_cfg, ORACLE_SOLVER).solve(x, ref)
        checked += 1
        if hmpc is None:
            input_dev, cost_dev = np.inf, np.inf
        else:
            input_dev = float(np.max(np.abs(hmpc.first_input - mpct.first_input)))
            cost_dev = abs(hmpc.cost - mpct.cost)
        if counterexample is None and (input_dev >= EQUIVALENCE_INPUT_TOL or cost_dev >= EQUIVALENCE_COST_TOL):
            counterexample = {"state": x.tolist(), "ref_x": ref.x.tolist(), "hmpc_status": status.value,
                              "input_deviation": input_dev, "cost_deviation": cost_dev}
        max_input_dev = max(max_input_dev, input_dev)
        max_cost_dev = max(max_cost_dev, cost_dev)

    enough = checked == samples
    return [
        PropertyResult(
            name="first_input_matches",
            passed=enough and max_input_dev < EQUIVALENCE_INPUT_TOL,
            detail=f"max first-input deviation {max_input_dev:.3e} over {checked} states",
            measurements={"states": checked, "max_input_deviation": max_input_dev},
            counterexample=counterexample,
        ),
        PropertyResult(
            name="optimal_cost_matches",
            passed=enough and max_cost_dev < EQUIVALENCE_COST_TOL,
            detail=f"max optimal-cost deviation {max_cost_dev:.3e} over {checked} states",
            measurements={"states": checked, "max_cost_deviation": max_cost_dev},
            counterexample=counterexample,
        ),
    ]


def harmonic_reachable_characterization(ctx: SuiteContext) -> List[PropertyResult]:
    """The harmonic oracle's optimum has no sine/cosine part and its bias is the steady optimum."""
    rng = ctx.rng()
    model, cfg, weights = ctx.model, ctx.formulation, ctx.weights
    w = _harmonic_frequency(cfg)
    samples = ctx.option("samples", 100)
    steady_weights = WeightSet(weights.Q, weights.R, T=weights.resolved("T_e"), S=weights.resolved("S_e"))
    scale = _state_scale(model)

    max_part, max_center = 0.0, 0.0
    part_example, center_example = None, None
    for _ in range(samples):
        spread = ADMISSIBLE_SPREAD if rng.random() < 0.5 else REFERENCE_SPREAD
        ref = _random_pair(rng, model, scale, spread)
        x_h, u_h = optimal_reachable_harmonic(model, weights, cfg.sigma, ref, w).reference
        steady = optimal_reachable_steady(model, steady_weights, cfg.sigma, ref).reference
        part = max(float(np.linalg.norm(v)) for v in (x_h.v_s, x_h.v_c, u_h.v_s, u_h.v_c))
        center = max(float(np.linalg.norm(x_h.v_e - steady.x)), float(np.linalg.norm(u_h.v_e - steady.u)))
        if part >= HARMONIC_PART_TOL and part_example is None:
            part_example = {"ref_x": ref.x.tolist(), "sine_cosine_norm": part}
        if center >= CENTER_TOL and center_example is None:
            center_example = {"ref_x": ref.x.tolist(), "center_deviation": center}
        max_part, max_center = max(max_part, part), max(max_center, center)

    return [
        PropertyResult(
            name="sine_cosine_parts_vanish",
            passed=max_part < HARMONIC_PART_TOL,
            detail=f"max sine/cosine norm {max_part:.3e} over {samples} references",
            measurements={"references": samples, "max_sine_cosine_norm": max_part},
            counterexample=part_example,
        ),
        PropertyResult(
            name="center_matches_steady_oracle",
            passed=max_center < CENTER_TOL,
            detail=f"max center deviation {max_center:.3e} over {samples} references",
            measurements={"references": samples, "max_center_deviation": max_center},
            counterexample=center_example,
        ),
    ]


def _binding_row(slack_upper: np.ndarray, slack_lower: np.ndarray, amplitude: np.ndarray):
    """(row, slack, upper?) limiting how far the oscillation can be scaled; None if nothing oscillates."""
    best = None
    for i in np.flatnonzero(amplitude > 1e-12):
        for slack, upper in ((slack_upper[i], True), (slack_lower[i], False)):
            ratio = slack / amplitude[i]
            if best is None or ratio < best[0]:
                best = (ratio, int(i), float(slack), upper)
    return None if best is None else best[1:]


def _scaled_harmonic(center: SteadyStatePair, x_osc: HarmonicParams, u_osc: HarmonicParams, alpha: float):
    w = x_osc.w
    return (
        HarmonicParams(center.x, alpha * x_osc.v_s, alpha * x_osc.v_c, w),
        HarmonicParams(center.u, alpha * u_osc.v_s, alpha * u_osc.v_c, w),
    )


def harmonic_oracle(ctx: SuiteContext) -> List[PropertyResult]:
    """
    Points built inside D and C pass the time-domain oracle; points pushed
    past one band margin by at least VIOLATION_MARGIN fail it.
    """
    rng = ctx.rng()
    model, cfg = ctx.model, ctx.formulation
    w = _harmonic_frequency(cfg)
    sigma = cfg.sigma
    samples = ctx.option("samples", 200)
    horizon = max(DEFAULT_ORACLE_HORIZON, int(np.ceil(2.0 * np.pi / w)) + 1)
    scale = _state_scale(model)

    inside_failures, outside_passes, skipped = 0, 0, 0
    inside_example, outside_example = None, None
    for _ in range(samples):
        ref = _random_pair(rng, model, scale, ADMISSIBLE_SPREAD)
        center = optimal_reachable_steady(model, _stage_weights(ctx), sigma, ref).reference
        u_osc = HarmonicParams(np.zeros(model.n_u), rng.standard_normal(model.n_u),
                               rng.standard_normal(model.n_u), w)
        x_osc = harmonic_state_from_input(model, u_osc, x_e=np.zeros(model.n_x))

        y_center = model.output(center.x, center.u)
        slack_upper = model.y_hi - sigma - y_center
        slack_lower = y_center - model.y_lo - sigma
        amplitude = output_params(x_osc, u_osc, model).amplitude
        binding = _binding_row(slack_upper, slack_lower, amplitude)
        if binding is None:
            skipped += 1
            continue
        row, slack, upper = binding
        alpha_max = slack / amplitude[row]

        x_in, u_in = _scaled_harmonic(center, x_osc, u_osc, rng.uniform(0.05, 0.95) * alpha_max)
        if not is_admissible_harmonic(x_in, u_in, model, sigma, horizon):
            inside_failures += 1
            if inside_example is None:
                inside_example = {"center_x": center.x.tolist(), "x_s": x_in.v_s.tolist(), "x_c": x_in.v_c.tolist()}

        excess = rng.uniform(VIOLATION_MARGIN, 10.0 * VIOLATION_MARGIN)
        x_out, u_out = _scaled_harmonic(center, x_osc, u_osc, (slack + excess) / amplitude[row])
        # rotate so the violating extreme of `row` falls on t = 0
        y_out = output_params(x_out, u_out, model)
        phase = np.arctan2(y_out.v_s[row], y_out.v_c[row]) + (0.0 if upper else np.pi)
        x_out, u_out = shift_harmonic(x_out, phase / w), shift_harmonic(u_out, phase / w)
        if is_admissible_harmonic(x_out, u_out, model, sigma, horizon):
            outside_passes += 1
            if outside_example is None:
                outside_example = {"center_x": center.x.tolist(), "row": row, "excess": excess}

    return [
        PropertyResult(
            name="members_pass",
            passed=inside_failures == 0,
            detail=f"{inside_failures} of {samples - skipped} members rejected",
            measurements={"samples": samples - skipped, "rejected": inside_failures},
            counterexample=inside_example,
        ),
        PropertyResult(
            name="violators_fail",
            passed=outside_passes == 0,
            detail=f"{outside_passes} of {samples - skipped} violators accepted",
            measurements={"samples": samples - skipped, "accepted": outside_passes},
            counterexample=outside_example,
        ),
    ]


def enumerate_kkt_solution(P, q, Aeq, beq, G, lo, hi, tol: float = 1e-9) -> np.ndarray:
    """
    Minimizer of 1/2 x'Px + q'x s.t. Aeq x = beq, lo <= G x <= hi by
    enumerating active sets and keeping the one whose KKT point is primal
    and dual feasible.

    Sets grow from the empty one and hold at most n - m_eq rows (more rows
    make the KKT matrix singular). Each set of rows is factored once and
    solved for all its lo/hi sign patterns together.
    """
    P, q = np.asarray(P, dtype=float), np.asarray(q, dtype=float)
    Aeq, G = np.asarray(Aeq, dtype=float), np.asarray(G, dtype=float)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    n, m_eq, m_b = P.shape[0], Aeq.shape[0], G.shape[0]
    Aeq = Aeq.reshape(m_eq, n)
    for size in range(min(m_b, n - m_eq) + 1):
        for active in itertools.combinations(range(m_b), size):
            idx = list(active)
            rows = np.vstack([Aeq, G[idx].reshape(size, n)])
            k = rows.shape[0]
            K = np.block([[P, rows.T], [rows, np.zeros((k, k))]])
            if np.linalg.cond(K) > 1e12:
                continue
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=size)), dtype=float).reshape(2 ** size, size)
            bounds = np.where(signs < 0, lo[idx], hi[idx])
            finite = np.all(np.isfinite(bounds), axis=1)
            if not np.any(finite):
                continue
            signs, bounds = signs[finite], bounds[finite]
            rhs = np.vstack([
                np.repeat(-q[:, None], len(signs), axis=1),
                np.repeat(np.asarray(beq, dtype=float).reshape(m_eq, 1), len(signs), axis=1),
                bounds.T,
            ])
            sol = np.linalg.solve(K, rhs)
            for col in range(sol.shape[1]):
                x, mu = sol[:n, col], sol[n + m_eq:, col]
                Gx = G @ x
                if np.any(Gx < lo - tol) or np.any(Gx > hi + tol):
                    continue
                if np.any(mu * signs[col] < -tol):
                    continue
                return x
    raise ValueError("no active set satisfies the KKT conditions")


def random_strongly_convex_qp(rng: np.random.Generator, max_n: int = MAX_KKT_VARIABLES,
                              max_box: int = MAX_KKT_BOX_ROWS) -> Dict[str, np.ndarray]:
    n = int(rng.integers(2, max_n + 1))
    m_b = int(rng.integers(1, max_box + 1))
    m_eq = int(rng.integers(0, min(2, n - 1) + 1))
    L = rng.standard_normal((n, n))
    x_feasible = rng.standard_normal(n)
    Aeq = rng.standard_normal((m_eq, n))
    G = rng.standard_normal((m_b, n))
    g = G @ x_feasible
    return {
        "P": L @ L.T + 0.1 * np.eye(n),
        "q": 2.0 * rng.standard_normal(n),
        "Aeq": Aeq,
        "beq": Aeq @ x_feasible,
        "G": G,
        "lo": g - rng.uniform(0.05, 1.0, m_b),
        "hi": g + rng.uniform(0.05, 1.0, m_b),
    }


def solver_kkt_oracle(ctx: SuiteContext) -> List[PropertyResult]:
    rng = ctx.rng()
    samples = ctx.option("samples", 500)
    max_error = 0.0
    unsolved = 0
    counterexample = None
    for i in range(samples):
        qp = random_strongly_convex_qp(rng)
        prog = ConeProgram(
            P=sparse.csc_matrix(qp["P"]),
            q=qp["q"],
            Aeq=sparse.csc_matrix(qp["Aeq"]),
            beq=qp["beq"],
            box_rows=sparse.csc_matrix(qp["G"]),
            lo=qp["lo"],
            hi=qp["hi"],
        )
        result = solve(prog, ORACLE_SOLVER)
        expected = enumerate_kkt_solution(qp["P"], qp["q"], qp["Aeq"], qp["beq"], qp["G"], qp["lo"], qp["hi"])
        error = float(np.max(np.abs(result.x - expected)))
        if result.status != SolverStatus.SOLVED:
            unsolved += 1
        if (error > KKT_TOL or result.status != SolverStatus.SOLVED) and counterexample is None:
            counterexample = {"sample": i, "n": int(qp["P"].shape[0]), "status": result.status.value, "error": error}
        max_error = max(max_error, error)

    return [
        PropertyResult(
            name="matches_active_set_enumeration",
            passed=max_error <= KKT_TOL and unsolved == 0,
            detail=f"max deviation {max_error:.3e} over {samples} programs, {unsolved} unsolved",
            measurements={"programs": samples, "max_deviation": max_error, "unsolved": unsolved},
            counterexample=counterexample,
        ),
    ]


def _project(v: np.ndarray) -> np.ndarray:
    t, s = project_soc(v[0], v[1:])
    return np.concatenate([[t], s])


def soc_projection(ctx: SuiteContext) -> List[PropertyResult]:
    rng = ctx.rng()
    samples = ctx.option("samples", 10_000)
    idempotence, expansion = 0.0, -np.inf
    for _ in range(samples):
        a = rng.standard_normal(3) * rng.uniform(0.1, 10.0)
        b = rng.standard_normal(3) * rng.uniform(0.1, 10.0)
        pa, pb = _project(a), _project(b)
        ppa = _project(pa)
        idempotence = max(idempotence, float(np.max(np.abs(ppa - pa))))
        expansion = max(expansion, float(np.linalg.norm(pa - pb) - np.linalg.norm(a - b)))

    return [
        PropertyResult(
            name="idempotent",
            passed=idempotence <= SOC_TOL,
            detail=f"max |P(P(v)) - P(v)| = {idempotence:.3e}",
            measurements={"points": samples, "max_idempotence_error": idempotence},
        ),
        PropertyResult(
            name="nonexpansive",
            passed=expansion <= SOC_TOL,
            detail=f"max ||P(a) - P(b)|| - ||a - b|| = {expansion:.3e}",
            measurements={"points": samples, "max_expansion": expansion},
        ),
    ]


SuiteFn = Callable[[SuiteContext], List[PropertyResult]]

SUITES: Dict[str, SuiteFn] = {
    "recursive_feasibility_mpct": recursive_feasibility_mpct,
    "recursive_feasibility_periodic": recursive_feasibility_periodic,
    "recursive_feasibility_hmpc": recursive_feasibility_hmpc,
    "hmpc_mpct_equivalence_w2pi": hmpc_mpct_equivalence_w2pi,
    "harmonic_reachable_characterization": harmonic_reachable_characterization,
    "harmonic_oracle": harmonic_oracle,
    "solver_kkt_oracle": solver_kkt_oracle,
    "soc_projection": soc_projection,
}


def available_suites() -> List[str]:
    return sorted(SUITES)


def get_suite(name: str) -> SuiteFn:
    try:
        return SUITES[name]
    except KeyError:
        raise UnknownSuiteError(name, available_suites()) from None


def run_suite(name: str, ctx: SuiteContext) -> SuiteReport:
    suite = get_suite(name)
    logger.info(f"[SUITE] running {name} with seed={ctx.seed}")
    properties = suite(ctx)
    passed = all(p.passed for p in properties)
    for p in properties:
        log = logger.info if p.passed else logger.warning
        log(f"[SUITE] {name}.{p.name}: {'pass' if p.passed else 'FAIL'} ({p.detail})")
    return SuiteReport(suite=name, seed=ctx.seed, passed=passed, properties=properties)
