"""
Optimal reachable references: the admissible steady state, periodic
trajectory or harmonic signal closest to the desired reference in the
offset cost. These are the limits the tracking controllers converge to
and serve as ground truth for the closed-loop checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sparse

from core.conic_solver import AdmmSolver, SolverConfig, SolverResult, SolverStatus
from core.errors import DimensionError, InfeasibleReferenceError, SolverFailure
from core.formulations import (
    ControllerKind,
    FormulationConfig,
    ProgramAssembler,
    WeightSet,
    harmonic_set_rows,
    steady_pair_rows,
)
from core.harmonic import (
    HarmonicParams,
    constraint_margins,
    dynamics_residual,
    is_degenerate_frequency,
)
from core.logger import get_logger
from core.lti import EPS_EQ, LtiModel, SteadyStatePair, is_admissible_steady_state, require_valid_model

logger = get_logger(__name__)

ORACLE_SOLVER = SolverConfig(eps_abs=1e-9, eps_rel=1e-9, max_iter=50000)
# The band is tightened by this much more than sigma so the returned point
# passes the exact sigma predicate despite solver round-off.
BAND_GUARD = 1e-8


@dataclass(frozen=True)
class AdmissibilityAudit:
    admissible: bool
    max_dynamics_residual: float
    min_band_margin: float
    problems: List[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ReachableResult:
    """
    kind is "steady", "periodic" or "harmonic"; reference is a
    SteadyStatePair, a tuple of T_p pairs or a (state, input) pair of
    HarmonicParams respectively.
    """
    kind: str
    reference: object
    objective_value: float
    sigma: float
    model: LtiModel = field(repr=False)
    solver: Optional[SolverResult] = field(default=None, repr=False)

    @property
    def center(self) -> SteadyStatePair:
        """Steady pair (for harmonic: the bias pair) the closed loop settles around."""
        if self.kind == "steady":
            return self.reference
        if self.kind == "harmonic":
            x_h, u_h = self.reference
            return SteadyStatePair(x_h.v_e, u_h.v_e)
        raise ValueError("a periodic reference has no single center")

    def admissibility_audit(self) -> AdmissibilityAudit:
        model, sigma = self.model, self.sigma
        problems: List[str] = []
        if self.kind == "steady":
            pairs = [self.reference]
            residual = _max_abs(self.reference.x - model.step(self.reference.x, self.reference.u))
            margin = _band_margin(model, pairs, sigma)
            if not is_admissible_steady_state(model, self.reference, sigma):
                problems.append("steady pair is not sigma-admissible")
        elif self.kind == "periodic":
            pairs = list(self.reference)
            residual = max(
                _max_abs(pairs[(j + 1) % len(pairs)].x - model.step(p.x, p.u)) for j, p in enumerate(pairs)
            )
            margin = _band_margin(model, pairs, sigma)
            if residual > EPS_EQ:
                problems.append(f"periodic dynamics residual {residual:.3e} exceeds {EPS_EQ}")
            if margin < 0:
                problems.append(f"periodic trajectory leaves the sigma band by {-margin:.3e}")
        else:
            x_h, u_h = self.reference
            residual = max(_max_abs(r) for r in dynamics_residual(x_h, u_h, model))
            upper, lower = constraint_margins(x_h, u_h, model, sigma)
            margin = float(min(upper.min(), lower.min()))
            if residual > EPS_EQ:
                problems.append(f"harmonic dynamics residual {residual:.3e} exceeds {EPS_EQ}")
            if margin < 0:
                problems.append(f"harmonic cone margin {margin:.3e} is negative")
        return AdmissibilityAudit(not problems, float(residual), float(margin), problems)


def _max_abs(v: np.ndarray) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def _band_margin(model: LtiModel, pairs: Sequence[SteadyStatePair], sigma: float) -> float:
    margins = []
    for p in pairs:
        y = model.output(p.x, p.u)
        margins.append(min(np.min(model.y_hi - sigma - y), np.min(y - model.y_lo - sigma)))
    return float(min(margins))


def _check_inputs(model: LtiModel, weights: WeightSet, sigma: float, pairs: Sequence[SteadyStatePair]) -> None:
    require_valid_model(model)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if weights.n_x != model.n_x or weights.n_u != model.n_u:
        raise DimensionError(
            f"weights sized for n_x={weights.n_x}, n_u={weights.n_u} but model has "
            f"n_x={model.n_x}, n_u={model.n_u}"
        )
    for p in pairs:
        if p.x.shape != (model.n_x,) or p.u.shape != (model.n_u,):
            raise DimensionError(
                f"reference pair must have x of length {model.n_x} and u of length {model.n_u}"
            )
    tightened = sigma + BAND_GUARD
    empty = np.flatnonzero(model.y_lo + tightened > model.y_hi - tightened)
    if empty.size:
        raise InfeasibleReferenceError(
            f"sigma={sigma} leaves no admissible output on rows {empty.tolist()}"
        )


def _solve_oracle(prog, what: str, solver_cfg: SolverConfig, warm_start=None) -> SolverResult:
    result = AdmmSolver(prog, solver_cfg).solve(warm_start)
    if result.status == SolverStatus.PRIMAL_INFEASIBLE:
        raise InfeasibleReferenceError(f"{what}: no sigma-admissible reference exists")
    if result.status != SolverStatus.SOLVED:
        raise SolverFailure(f"{what}: oracle did not converge ({result.status.value})")
    logger.debug(
        f"[REACHABLE] {what}: iterations={result.iterations} polished={result.polished} "
        f"objective={result.objective:.6e}",
        extra={"console": False},
    )
    return result


def optimal_reachable_steady(
    model: LtiModel,
    weights: WeightSet,
    sigma: float,
    ref: SteadyStatePair,
    solver_cfg: SolverConfig = ORACLE_SOLVER,
    warm_start=None,
) -> ReachableResult:
    """argmin ||x_s - x_r||^2_T + ||u_s - u_r||^2_S over sigma-admissible steady states."""
    _check_inputs(model, weights, sigma, [ref])
    n_x, n_u = model.n_x, model.n_u
    asm = ProgramAssembler(n_x + n_u)
    x_s, u_s = asm.sel(0, n_x), asm.sel(n_x, n_u)
    steady_pair_rows(asm, model, sigma + BAND_GUARD, x_s, u_s)
    asm.cost(x_s, weights.resolved("T"), ("x", 0))
    asm.cost(u_s, weights.resolved("S"), ("u", 0))
    prog = asm.to_program(ref.x[None, :], ref.u[None, :])

    result = _solve_oracle(prog, "steady", solver_cfg, warm_start)
    pair = SteadyStatePair(result.x[:n_x], result.x[n_x:])
    return ReachableResult("steady", pair, result.objective, sigma, model, result)


def optimal_reachable_periodic(
    model: LtiModel,
    weights: WeightSet,
    sigma: float,
    ref_window: Sequence[SteadyStatePair],
    solver_cfg: SolverConfig = ORACLE_SOLVER,
    warm_start=None,
) -> ReachableResult:
    """
    argmin sum_j ||x(j) - x_r(j)||^2_T + ||u(j) - u_r(j)||^2_S over
    sigma-admissible T_p-periodic trajectories, T_p = len(ref_window).
    """
    T_p = len(ref_window)
    if T_p < 2:
        raise ValueError(f"period T_p must be >= 2, got {T_p}")
    _check_inputs(model, weights, sigma, ref_window)
    n_x, n_u = model.n_x, model.n_u
    A, B = sparse.csr_matrix(model.A), sparse.csr_matrix(model.B)
    E, F = sparse.csr_matrix(model.E), sparse.csr_matrix(model.F)
    asm = ProgramAssembler(T_p * (n_x + n_u))
    x = lambda j: asm.sel((j % T_p) * n_x, n_x)
    u = lambda j: asm.sel(T_p * n_x + (j % T_p) * n_u, n_u)
    tight = sigma + BAND_GUARD
    for j in range(T_p):
        asm.equality(x(j + 1) - A @ x(j) - B @ u(j), 0.0)
        asm.box(E @ x(j) + F @ u(j), model.y_lo + tight, model.y_hi - tight)
        asm.cost(x(j), weights.resolved("T"), ("x", j))
        asm.cost(u(j), weights.resolved("S"), ("u", j))
    Xr = np.array([p.x for p in ref_window])
    Ur = np.array([p.u for p in ref_window])
    prog = asm.to_program(Xr, Ur)

    result = _solve_oracle(prog, "periodic", solver_cfg, warm_start)
    xs = result.x[:T_p * n_x].reshape(T_p, n_x)
    us = result.x[T_p * n_x:].reshape(T_p, n_u)
    pairs = tuple(SteadyStatePair(xs[j], us[j]) for j in range(T_p))
    return ReachableResult("periodic", pairs, result.objective, sigma, model, result)


def optimal_reachable_harmonic(
    model: LtiModel,
    weights: WeightSet,
    sigma: float,
    ref: SteadyStatePair,
    w: float,
    solver_cfg: SolverConfig = ORACLE_SOLVER,
    warm_start=None,
) -> ReachableResult:
    """
    argmin ||x_e - x_r||^2_Te + ||u_e - u_r||^2_Se + ||x_s||^2_Th + ||x_c||^2_Th
           + ||u_s||^2_Sh + ||u_c||^2_Sh
    over harmonic pairs in D and the sigma-tightened C. The sine/cosine
    parts of the optimum vanish, so its center is a steady state.
    """
    if not np.isfinite(w) or w <= 0:
        raise ValueError(f"frequency w must be > 0, got {w}")
    _check_inputs(model, weights, sigma, [ref])
    n_x, n_u = model.n_x, model.n_u
    asm = ProgramAssembler(3 * (n_x + n_u))
    xe, xs, xc = (asm.sel(i * n_x, n_x) for i in range(3))
    ue, us, uc = (asm.sel(3 * n_x + i * n_u, n_u) for i in range(3))
    harmonic_set_rows(asm, model, sigma + BAND_GUARD, w, (xe, xs, xc), (ue, us, uc))
    T_h, S_h = weights.resolved("T_h"), weights.resolved("S_h")
    asm.cost(xe, weights.resolved("T_e"), ("x", 0))
    asm.cost(ue, weights.resolved("S_e"), ("u", 0))
    for block, W in ((xs, T_h), (xc, T_h), (us, S_h), (uc, S_h)):
        asm.cost(block, W)
    prog = asm.to_program(ref.x[None, :], ref.u[None, :])

    result = _solve_oracle(prog, "harmonic", solver_cfg, warm_start)
    v = result.x
    x_h = HarmonicParams(v[:n_x], v[n_x:2 * n_x], v[2 * n_x:3 * n_x], w)
    off = 3 * n_x
    u_h = HarmonicParams(v[off:off + n_u], v[off + n_u:off + 2 * n_u], v[off + 2 * n_u:off + 3 * n_u], w)
    return ReachableResult("harmonic", (x_h, u_h), result.objective, sigma, model, result)


def reachable_distance(result: ReachableResult, state: np.ndarray, t: int = 0) -> float:
    """Euclidean distance from `state` to the reachable reference at time index t."""
    if result.kind == "periodic":
        target = result.reference[t % len(result.reference)].x
    else:
        target = result.center.x
    return float(np.linalg.norm(np.asarray(state, dtype=float) - target))


def _steady_equivalent(weights: WeightSet) -> WeightSet:
    return WeightSet(weights.Q, weights.R, T=weights.resolved("T_e"), S=weights.resolved("S_e"))


def optimal_reachable_for(
    kind: ControllerKind,
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    payload,
    solver_cfg: SolverConfig = ORACLE_SOLVER,
) -> ReachableResult:
    """
    The reference a controller of `kind` settles on for a constant payload.
    Equality MPC has no offset cost, so its target is the payload itself;
    harmonic MPC at a degenerate frequency settles like MPCT with T_e, S_e.
    """
    kind = ControllerKind(kind)
    if kind == ControllerKind.EQUALITY:
        return ReachableResult("steady", payload, 0.0, cfg.sigma, model, None)
    if kind == ControllerKind.PERIODIC:
        return optimal_reachable_periodic(model, weights, cfg.sigma, payload, solver_cfg)
    if kind == ControllerKind.HMPC and cfg.w is not None and not is_degenerate_frequency(cfg.w):
        return optimal_reachable_harmonic(model, weights, cfg.sigma, payload, cfg.w, solver_cfg)
    steady_weights = weights if kind == ControllerKind.MPCT else _steady_equivalent(weights)
    return optimal_reachable_steady(model, steady_weights, cfg.sigma, payload, solver_cfg)
