"""
Builders translating (model, weights, horizon, reference) into ConeProgram
instances for the four tracking controllers.

Decision vector (stacked, non-condensed):

    x(0..N) | u(0..N-1) | artificial reference

where the artificial block is empty (equality MPC), (x_s, u_s) (MPCT),
T_p pairs (x_s(j), u_s(j)) (periodic MPCT) or (x_e, x_s, x_c, u_e, u_s, u_c)
(harmonic MPC).

Every cost is a sum of terms ||M z - r||^2_W. The matrices M, W are fixed
by the structure, while the targets r come from the reference, so a new
reference only changes q and the constant. The current state only changes
the right-hand side of the x(0) rows and, when it lies outside the band,
the bounds of the k = 0 band rows it fixes. Both facts are what makes
`update_parameters` refactorization-free.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sparse

from core.conic_solver import ConeProgram, SocBlock, SolverResult, SolverStatus, WarmStart
from core.errors import DimensionError, SolverFailure
from core.harmonic import HarmonicParams, is_degenerate_frequency, shift_harmonic
from core.logger import get_logger
from core.lti import LtiModel, SteadyStatePair, controllability_index, require_valid_model

logger = get_logger(__name__)

DEFAULT_SIGMA = 1e-4


class ControllerKind(str, Enum):
    EQUALITY = "equality"
    MPCT = "mpct"
    PERIODIC = "periodic"
    HMPC = "hmpc"


def _pd_matrix(value, size: int, name: str, diagonal: bool = False) -> np.ndarray:
    M = np.array(value, dtype=float)
    if M.ndim == 1:
        M = np.diag(M)
    if M.shape != (size, size):
        raise DimensionError(f"weight {name} must be {size}x{size}, got {M.shape}")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"weight {name} must be symmetric")
    if diagonal and np.any(M - np.diag(np.diag(M))):
        raise ValueError(f"weight {name} must be diagonal")
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise ValueError(f"weight {name} must be positive definite")
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class WeightSet:
    """
    Stage weights Q, R plus offset weights.

    Missing offset weights resolve along T_e -> T, S_e -> S, T_h -> T_e,
    S_h -> S_e; T and S themselves have no fallback.
    """
    Q: np.ndarray
    R: np.ndarray
    T: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    T_e: Optional[np.ndarray] = None
    S_e: Optional[np.ndarray] = None
    T_h: Optional[np.ndarray] = None
    S_h: Optional[np.ndarray] = None

    def __post_init__(self):
        # 1-D input means diagonal.
        Q = np.atleast_1d(np.array(self.Q, dtype=float))
        R = np.atleast_1d(np.array(self.R, dtype=float))
        n_x, n_u = Q.shape[0], R.shape[0]
        object.__setattr__(self, "Q", _pd_matrix(Q, n_x, "Q"))
        object.__setattr__(self, "R", _pd_matrix(R, n_u, "R"))
        for name, size, diagonal in (
            ("T", n_x, False), ("S", n_u, False),
            ("T_e", n_x, False), ("S_e", n_u, False),
            ("T_h", n_x, True), ("S_h", n_u, True),
        ):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _pd_matrix(value, size, name, diagonal))

    @property
    def n_x(self) -> int:
        return self.Q.shape[0]

    @property
    def n_u(self) -> int:
        return self.R.shape[0]

    def resolved(self, name: str) -> np.ndarray:
        fallback = {"T_e": "T", "S_e": "S", "T_h": "T_e", "S_h": "S_e"}
        value = getattr(self, name)
        if value is not None:
            return value
        if name not in fallback:
            raise ValueError(f"weight {name} is required for this controller")
        value = self.resolved(fallback[name])
        if name in ("T_h", "S_h"):
            _pd_matrix(value, value.shape[0], name, diagonal=True)
        return value

    def scaled(self, factor: float) -> "WeightSet":
        """All offset weights multiplied by `factor` (stage weights unchanged)."""
        if factor <= 0:
            raise ValueError(f"scale factor must be > 0, got {factor}")
        return replace(self, **{
            name: None if getattr(self, name) is None else factor * getattr(self, name)
            for name in ("T", "S", "T_e", "S_e", "T_h", "S_h")
        })


@dataclass(frozen=True)
class FormulationConfig:
    N: int
    sigma: float = DEFAULT_SIGMA
    T_p: Optional[int] = None
    w: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"horizon N must be an integer >= 1, got {self.N}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.T_p is not None and (int(self.T_p) != self.T_p or self.T_p < 2):
            raise ValueError(f"period T_p must be an integer >= 2, got {self.T_p}")
        if self.w is not None and (not np.isfinite(self.w) or self.w < 0):
            raise ValueError(f"frequency w must be finite and >= 0, got {self.w}")


@dataclass(frozen=True, eq=False)
class _CostTerm:
    """||M z - r||^2_W with r = 0 or r = reference[slot]."""
    M: sparse.csr_matrix
    W: np.ndarray
    slot: Optional[Tuple[str, int]] = None


@dataclass(frozen=True, eq=False)
class ProgramLayout:
    kind: ControllerKind
    model: LtiModel
    weights: WeightSet
    cfg: FormulationConfig
    n_var: int
    offsets: Dict[str, int]
    period: int
    cost_terms: Tuple[_CostTerm, ...]
    state_rows: slice
    terminal_ref_rows: Optional[slice]
    beq_static: np.ndarray
    # k = 0 band rows that depend on x(0) only, with their E rows
    initial_band_rows: np.ndarray
    initial_band_E: np.ndarray
    lo_static: np.ndarray
    hi_static: np.ndarray
    reduced: bool = False

    @property
    def N(self) -> int:
        return self.cfg.N

    def state_offset(self, k: int) -> int:
        return self.offsets["x"] + k * self.model.n_x

    def input_offset(self, k: int) -> int:
        return self.offsets["u"] + k * self.model.n_u


@dataclass(frozen=True, eq=False)
class DecodedSolution:
    kind: ControllerKind
    predicted_states: np.ndarray
    predicted_inputs: np.ndarray
    # None (equality) | SteadyStatePair (mpct) | tuple of T_p pairs (periodic)
    # | (HarmonicParams state, HarmonicParams input) (hmpc)
    artificial_ref: object
    status: SolverStatus = SolverStatus.SOLVED
    cost: float = 0.0

    @property
    def first_input(self) -> np.ndarray:
        return self.predicted_inputs[0]


Reference = Union[SteadyStatePair, Sequence[SteadyStatePair]]


class ProgramAssembler:
    def __init__(self, n_var: int):
        self.n_var = n_var
        self._eq: List[sparse.csr_matrix] = []
        self._beq: List[np.ndarray] = []
        self._m_eq = 0
        self._box: List[sparse.csr_matrix] = []
        self._lo: List[np.ndarray] = []
        self._hi: List[np.ndarray] = []
        self._m_box = 0
        self.cones: List[SocBlock] = []
        self.terms: List[_CostTerm] = []

    def sel(self, offset: int, size: int) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (np.ones(size), (np.arange(size), offset + np.arange(size))),
            shape=(size, self.n_var),
        )

    def equality(self, rows, rhs) -> slice:
        rows = sparse.csr_matrix(rows)
        start = self._m_eq
        self._eq.append(rows)
        self._beq.append(np.broadcast_to(np.asarray(rhs, dtype=float), (rows.shape[0],)).copy())
        self._m_eq += rows.shape[0]
        return slice(start, self._m_eq)

    def box(self, rows, lo, hi) -> slice:
        rows = sparse.csr_matrix(rows)
        start = self._m_box
        self._box.append(rows)
        self._lo.append(np.asarray(lo, dtype=float))
        self._hi.append(np.asarray(hi, dtype=float))
        self._m_box += rows.shape[0]
        return slice(start, self._m_box)

    def cone(self, selector, offset) -> None:
        self.cones.append(SocBlock(sparse.csr_matrix(selector), offset))

    def cost(self, M, W, slot: Optional[Tuple[str, int]] = None) -> None:
        self.terms.append(_CostTerm(sparse.csr_matrix(M), np.asarray(W, dtype=float), slot))

    def hessian(self) -> sparse.csc_matrix:
        P = sparse.csr_matrix((self.n_var, self.n_var))
        for term in self.terms:
            P = P + 2.0 * (term.M.T @ sparse.csr_matrix(term.W) @ term.M)
        return sparse.csc_matrix(0.5 * (P + P.T))

    def constraint_data(self):
        empty = sparse.csr_matrix((0, self.n_var))
        Aeq = sparse.vstack(self._eq, format="csc") if self._eq else sparse.csc_matrix(empty)
        beq = np.concatenate(self._beq) if self._beq else np.zeros(0)
        box = sparse.vstack(self._box, format="csc") if self._box else sparse.csc_matrix(empty)
        lo = np.concatenate(self._lo) if self._lo else np.zeros(0)
        hi = np.concatenate(self._hi) if self._hi else np.zeros(0)
        return Aeq, beq, box, lo, hi

    def to_program(self, Xr: np.ndarray, Ur: np.ndarray) -> ConeProgram:
        """Standalone program (no layout) with cost targets taken from Xr / Ur rows."""
        Aeq, beq, box, lo, hi = self.constraint_data()
        q, constant = cost_vectors(self.terms, self.n_var, Xr, Ur)
        return ConeProgram(
            P=self.hessian(), q=q, Aeq=Aeq, beq=beq, box_rows=box, lo=lo, hi=hi,
            soc_blocks=tuple(self.cones), constant=constant,
        )


def _check_setup(model: LtiModel, weights: WeightSet, cfg: FormulationConfig, kind: ControllerKind) -> None:
    require_valid_model(model)
    if weights.n_x != model.n_x or weights.n_u != model.n_u:
        raise DimensionError(
            f"weights sized for n_x={weights.n_x}, n_u={weights.n_u} but model has "
            f"n_x={model.n_x}, n_u={model.n_u}"
        )
    index = controllability_index(model)
    if cfg.N < index:
        logger.warning(
            f"[FORMULATION] {kind.value}: horizon N={cfg.N} is below the controllability index {index}; "
            f"convergence guarantees need N >= {index}"
        )


def _reference_arrays(layout: ProgramLayout, ref: Reference) -> Tuple[np.ndarray, np.ndarray]:
    model = layout.model
    if layout.kind == ControllerKind.PERIODIC:
        if isinstance(ref, SteadyStatePair) or len(ref) != layout.period:
            got = 1 if isinstance(ref, SteadyStatePair) else len(ref)
            raise DimensionError(f"periodic reference window must hold T_p={layout.period} pairs, got {got}")
        pairs = list(ref)
    else:
        if not isinstance(ref, SteadyStatePair):
            raise DimensionError(f"{layout.kind.value} expects a single steady reference pair")
        pairs = [ref]
    for pair in pairs:
        if pair.x.shape != (model.n_x,) or pair.u.shape != (model.n_u,):
            raise DimensionError(
                f"reference pair must have x of length {model.n_x} and u of length {model.n_u}, "
                f"got {pair.x.shape[0]} and {pair.u.shape[0]}"
            )
    return np.array([p.x for p in pairs]), np.array([p.u for p in pairs])


def cost_vectors(terms: Sequence[_CostTerm], n_var: int, Xr: np.ndarray, Ur: np.ndarray) -> Tuple[np.ndarray, float]:
    """Linear cost and constant of sum ||M z - r||^2_W for the given reference rows."""
    q = np.zeros(n_var)
    constant = 0.0
    for term in terms:
        if term.slot is None:
            continue
        kind, index = term.slot
        r = Xr[index] if kind == "x" else Ur[index]
        Wr = term.W @ r
        q -= 2.0 * (term.M.T @ Wr)
        constant += float(r @ Wr)
    return q, constant


@dataclass(frozen=True)
class ParameterVectors:
    q: np.ndarray
    constant: float
    beq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _parameter_vectors(layout: ProgramLayout, state, ref: Reference) -> ParameterVectors:
    state = np.asarray(state, dtype=float).reshape(-1)
    if state.shape != (layout.model.n_x,):
        raise DimensionError(f"state must have length {layout.model.n_x}, got {state.shape[0]}")
    Xr, Ur = _reference_arrays(layout, ref)

    q, constant = cost_vectors(layout.cost_terms, layout.n_var, Xr, Ur)

    beq = layout.beq_static.copy()
    beq[layout.state_rows] = state
    if layout.terminal_ref_rows is not None:
        beq[layout.terminal_ref_rows] = Xr[0]

    # Rows fixed by the measured state are widened to contain it, so a plant
    # that leaves the band (model mismatch) still yields a feasible program.
    lo, hi = layout.lo_static.copy(), layout.hi_static.copy()
    rows = layout.initial_band_rows
    if rows.size:
        y0 = layout.initial_band_E @ state
        lo[rows] = np.minimum(lo[rows], y0)
        hi[rows] = np.maximum(hi[rows], y0)
    return ParameterVectors(q, constant, beq, lo, hi)


@dataclass(frozen=True)
class _TrajectoryRows:
    state: slice
    initial_band: np.ndarray
    initial_band_E: np.ndarray


def _trajectory_rows(asm: ProgramAssembler, model: LtiModel, N: int, offsets: Dict[str, int]) -> _TrajectoryRows:
    """x(0) = state, dynamics for k = 0..N-1, output band for k = 0..N-1."""
    n_x, n_u = model.n_x, model.n_u
    A, B, E, F = (sparse.csr_matrix(M) for M in (model.A, model.B, model.E, model.F))
    x = lambda k: asm.sel(offsets["x"] + k * n_x, n_x)
    u = lambda k: asm.sel(offsets["u"] + k * n_u, n_u)

    state_rows = asm.equality(x(0), 0.0)
    for k in range(N):
        asm.equality(x(k + 1) - A @ x(k) - B @ u(k), 0.0)
    first_band = asm.box(E @ x(0) + F @ u(0), model.y_lo, model.y_hi)
    for k in range(1, N):
        asm.box(E @ x(k) + F @ u(k), model.y_lo, model.y_hi)
    state_only = np.flatnonzero(~np.any(model.F != 0, axis=1))
    return _TrajectoryRows(state_rows, first_band.start + state_only, model.E[state_only])


def steady_pair_rows(asm: ProgramAssembler, model: LtiModel, sigma: float, x_sel, u_sel) -> None:
    """x_s = A x_s + B u_s and the sigma-tightened band on (x_s, u_s)."""
    A, B, E, F = (sparse.csr_matrix(M) for M in (model.A, model.B, model.E, model.F))
    asm.equality(x_sel - A @ x_sel - B @ u_sel, 0.0)
    asm.box(E @ x_sel + F @ u_sel, model.y_lo + sigma, model.y_hi - sigma)


def harmonic_set_rows(asm: ProgramAssembler, model: LtiModel, sigma: float, w: float, x_sel, u_sel) -> None:
    """
    Membership of the harmonic pair in D (three equality blocks) and C
    (an upper and a lower cone per output row).
    """
    A, B = sparse.csr_matrix(model.A), sparse.csr_matrix(model.B)
    E, F = sparse.csr_matrix(model.E), sparse.csr_matrix(model.F)
    xe, xs, xc = x_sel
    ue, us, uc = u_sel
    c, s = float(np.cos(w)), float(np.sin(w))

    asm.equality(xe - A @ xe - B @ ue, 0.0)
    asm.equality(c * xs - s * xc - A @ xs - B @ us, 0.0)
    asm.equality(s * xs + c * xc - A @ xc - B @ uc, 0.0)

    y_e = E @ xe + F @ ue
    y_s = E @ xs + F @ us
    y_c = E @ xc + F @ uc
    for i in range(model.n_y):
        tail = sparse.vstack([y_s[i], y_c[i]])
        asm.cone(sparse.vstack([-y_e[i], tail]), [model.y_hi[i] - sigma, 0.0, 0.0])
        asm.cone(sparse.vstack([y_e[i], tail]), [-model.y_lo[i] - sigma, 0.0, 0.0])


def check_band(model: LtiModel, sigma: float) -> None:
    if np.any(model.y_lo + sigma > model.y_hi - sigma):
        raise ValueError(f"sigma={sigma} empties the output band on at least one row")


def _finish(
    asm: ProgramAssembler,
    kind: ControllerKind,
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    offsets: Dict[str, int],
    period: int,
    rows: _TrajectoryRows,
    terminal_ref_rows: Optional[slice],
    state,
    ref: Reference,
    reduced: bool = False,
) -> ConeProgram:
    Aeq, beq, box, lo, hi = asm.constraint_data()
    layout = ProgramLayout(
        kind=kind,
        model=model,
        weights=weights,
        cfg=cfg,
        n_var=asm.n_var,
        offsets=offsets,
        period=period,
        cost_terms=tuple(asm.terms),
        state_rows=rows.state,
        terminal_ref_rows=terminal_ref_rows,
        beq_static=beq,
        initial_band_rows=rows.initial_band,
        initial_band_E=rows.initial_band_E,
        lo_static=lo,
        hi_static=hi,
        reduced=reduced,
    )
    params = _parameter_vectors(layout, state, ref)
    prog = ConeProgram(
        P=asm.hessian(),
        q=params.q,
        Aeq=Aeq,
        beq=params.beq,
        box_rows=box,
        lo=params.lo,
        hi=params.hi,
        soc_blocks=tuple(asm.cones),
        constant=params.constant,
        layout=layout,
    )
    logger.debug(
        f"[FORMULATION] built {kind.value}: n={prog.n} m_eq={prog.m_eq} m_box={prog.m_box} "
        f"cones={len(prog.soc_blocks)}",
        extra={"console": False},
    )
    return prog


def build_equality_mpc(
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    state,
    ref: SteadyStatePair,
) -> ConeProgram:
    """Standard MPC with the terminal equality x(N) = x_r."""
    kind = ControllerKind.EQUALITY
    _check_setup(model, weights, cfg, kind)
    n_x, n_u, N = model.n_x, model.n_u, cfg.N
    offsets = {"x": 0, "u": (N + 1) * n_x}
    asm = ProgramAssembler((N + 1) * n_x + N * n_u)

    rows = _trajectory_rows(asm, model, N, offsets)
    terminal_rows = asm.equality(asm.sel(offsets["x"] + N * n_x, n_x), 0.0)
    for k in range(N):
        asm.cost(asm.sel(offsets["x"] + k * n_x, n_x), weights.Q, ("x", 0))
        asm.cost(asm.sel(offsets["u"] + k * n_u, n_u), weights.R, ("u", 0))
    return _finish(asm, kind, model, weights, cfg, offsets, 1, rows, terminal_rows, state, ref)


def build_mpct(
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    state,
    ref: SteadyStatePair,
) -> ConeProgram:
    """MPC for tracking with one artificial steady-state pair (x_s, u_s)."""
    kind = ControllerKind.MPCT
    _check_setup(model, weights, cfg, kind)
    check_band(model, cfg.sigma)
    T, S = weights.resolved("T"), weights.resolved("S")
    n_x, n_u, N = model.n_x, model.n_u, cfg.N
    offsets = {"x": 0, "u": (N + 1) * n_x}
    offsets["xs"] = offsets["u"] + N * n_u
    offsets["us"] = offsets["xs"] + n_x
    asm = ProgramAssembler(offsets["us"] + n_u)
    x_s = asm.sel(offsets["xs"], n_x)
    u_s = asm.sel(offsets["us"], n_u)

    rows = _trajectory_rows(asm, model, N, offsets)
    asm.equality(asm.sel(offsets["x"] + N * n_x, n_x) - x_s, 0.0)
    steady_pair_rows(asm, model, cfg.sigma, x_s, u_s)

    for k in range(N):
        asm.cost(asm.sel(offsets["x"] + k * n_x, n_x) - x_s, weights.Q)
        asm.cost(asm.sel(offsets["u"] + k * n_u, n_u) - u_s, weights.R)
    asm.cost(x_s, T, ("x", 0))
    asm.cost(u_s, S, ("u", 0))
    return _finish(asm, kind, model, weights, cfg, offsets, 1, rows, None, state, ref)


def build_periodic_mpct(
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    state,
    ref_window: Sequence[SteadyStatePair],
) -> ConeProgram:
    """
    MPC for tracking periodic references: a T_p-periodic artificial
    trajectory (x_s(j), u_s(j)) closed by the wrap row
    x_s(0) = A x_s(T_p-1) + B u_s(T_p-1).

    ref_window[j] is the desired pair at absolute time t + j; the terminal
    row is x(N) = x_s(N mod T_p).
    """
    kind = ControllerKind.PERIODIC
    if cfg.T_p is None:
        raise ValueError("periodic MPCT requires the period T_p")
    _check_setup(model, weights, cfg, kind)
    check_band(model, cfg.sigma)
    T, S = weights.resolved("T"), weights.resolved("S")
    n_x, n_u, N, T_p = model.n_x, model.n_u, cfg.N, cfg.T_p
    A, B = sparse.csr_matrix(model.A), sparse.csr_matrix(model.B)
    E, F = sparse.csr_matrix(model.E), sparse.csr_matrix(model.F)

    offsets = {"x": 0, "u": (N + 1) * n_x}
    offsets["xs"] = offsets["u"] + N * n_u
    offsets["us"] = offsets["xs"] + T_p * n_x
    asm = ProgramAssembler(offsets["us"] + T_p * n_u)
    x_s = lambda j: asm.sel(offsets["xs"] + (j % T_p) * n_x, n_x)
    u_s = lambda j: asm.sel(offsets["us"] + (j % T_p) * n_u, n_u)

    rows = _trajectory_rows(asm, model, N, offsets)
    asm.equality(asm.sel(offsets["x"] + N * n_x, n_x) - x_s(N), 0.0)
    for j in range(T_p):
        # j = T_p - 1 is the wrap row back to x_s(0).
        asm.equality(x_s(j + 1) - A @ x_s(j) - B @ u_s(j), 0.0)
        asm.box(E @ x_s(j) + F @ u_s(j), model.y_lo + cfg.sigma, model.y_hi - cfg.sigma)

    for k in range(N):
        asm.cost(asm.sel(offsets["x"] + k * n_x, n_x) - x_s(k), weights.Q)
        asm.cost(asm.sel(offsets["u"] + k * n_u, n_u) - u_s(k), weights.R)
    for j in range(T_p):
        asm.cost(x_s(j), T, ("x", j))
        asm.cost(u_s(j), S, ("u", j))
    return _finish(asm, kind, model, weights, cfg, offsets, T_p, rows, None, state, ref_window)


def build_hmpc(
    model: LtiModel,
    weights: WeightSet,
    cfg: FormulationConfig,
    state,
    ref: SteadyStatePair,
) -> ConeProgram:
    """
    Harmonic MPC: the artificial reference is a harmonic signal
    x_h(k) = x_e + x_s sin(w k) + x_c cos(w k) (same for u_h), kept in the
    dynamics set D by equality rows and in the band by 2 * n_y cones.

    At w = 0 or a multiple of 2*pi the sine/cosine parameters are pinned to
    zero, which reduces the controller to MPCT with T = T_e, S = S_e.
    """
    kind = ControllerKind.HMPC
    if cfg.w is None:
        raise ValueError("harmonic MPC requires the base frequency w")
    _check_setup(model, weights, cfg, kind)
    check_band(model, cfg.sigma)
    T_e, S_e = weights.resolved("T_e"), weights.resolved("S_e")
    T_h, S_h = weights.resolved("T_h"), weights.resolved("S_h")
    n_x, n_u, N, w, sigma = model.n_x, model.n_u, cfg.N, cfg.w, cfg.sigma

    offsets = {"x": 0, "u": (N + 1) * n_x}
    cursor = offsets["u"] + N * n_u
    for name, size in (("xe", n_x), ("xs", n_x), ("xc", n_x), ("ue", n_u), ("us", n_u), ("uc", n_u)):
        offsets[name] = cursor
        cursor += size
    asm = ProgramAssembler(cursor)
    xe, xs, xc = (asm.sel(offsets[k], n_x) for k in ("xe", "xs", "xc"))
    ue, us, uc = (asm.sel(offsets[k], n_u) for k in ("ue", "us", "uc"))

    rows = _trajectory_rows(asm, model, N, offsets)
    s_N, c_N = float(np.sin(w * N)), float(np.cos(w * N))
    asm.equality(asm.sel(offsets["x"] + N * n_x, n_x) - xe - s_N * xs - c_N * xc, 0.0)
    harmonic_set_rows(asm, model, sigma, w, (xe, xs, xc), (ue, us, uc))
    reduced = is_degenerate_frequency(w)
    if reduced:
        logger.warning(
            f"[FORMULATION] hmpc: w={w} is a multiple of 2*pi; sine/cosine parameters pinned to zero"
        )
        for block in (xs, xc, us, uc):
            asm.equality(block, 0.0)

    for k in range(N):
        sk, ck = float(np.sin(w * k)), float(np.cos(w * k))
        asm.cost(asm.sel(offsets["x"] + k * n_x, n_x) - xe - sk * xs - ck * xc, weights.Q)
        asm.cost(asm.sel(offsets["u"] + k * n_u, n_u) - ue - sk * us - ck * uc, weights.R)
    asm.cost(xe, T_e, ("x", 0))
    asm.cost(ue, S_e, ("u", 0))
    asm.cost(xs, T_h)
    asm.cost(xc, T_h)
    asm.cost(us, S_h)
    asm.cost(uc, S_h)
    return _finish(asm, kind, model, weights, cfg, offsets, 1, rows, None, state, ref, reduced)


BUILDERS = {
    ControllerKind.EQUALITY: build_equality_mpc,
    ControllerKind.MPCT: build_mpct,
    ControllerKind.PERIODIC: build_periodic_mpct,
    ControllerKind.HMPC: build_hmpc,
}


def build_program(kind: ControllerKind, model, weights, cfg, state, ref) -> ConeProgram:
    return BUILDERS[ControllerKind(kind)](model, weights, cfg, state, ref)


def _layout_of(prog: ConeProgram) -> ProgramLayout:
    if not isinstance(prog.layout, ProgramLayout):
        raise SolverFailure("program was not produced by a formulation builder")
    return prog.layout


def update_parameters(prog: ConeProgram, state, ref: Reference) -> ConeProgram:
    """
    New state and reference for the same structure. Only vectors change:
    q, the constant, beq and the bounds of the k = 0 band rows that the
    state fixes.
    """
    layout = _layout_of(prog)
    params = _parameter_vectors(layout, state, ref)
    if params.beq.shape != prog.beq.shape or params.lo.shape != prog.lo.shape:
        raise SolverFailure("constraint rows do not match the program structure")
    return replace(prog, q=params.q, constant=params.constant, beq=params.beq, lo=params.lo, hi=params.hi)


def objective_value(prog: ConeProgram, x) -> float:
    """1/2 x'Px + q'x + c: the controller cost, zero at the reference."""
    x = np.asarray(x, dtype=float)
    if x.shape != (prog.n,):
        raise DimensionError(f"decision vector must have length {prog.n}, got {x.shape[0]}")
    return prog.objective(x)


def decode(
    prog: ConeProgram,
    result: Union[SolverResult, np.ndarray],
    kind: Optional[ControllerKind] = None,
    allow_inexact: bool = False,
) -> DecodedSolution:
    layout = _layout_of(prog)
    if kind is not None and ControllerKind(kind) != layout.kind:
        raise SolverFailure(f"program was built for {layout.kind.value}, not {ControllerKind(kind).value}")

    status = SolverStatus.SOLVED
    if isinstance(result, SolverResult):
        status = result.status
        if status == SolverStatus.PRIMAL_INFEASIBLE or (
            status == SolverStatus.MAX_ITER_REACHED and not allow_inexact
        ):
            raise SolverFailure(f"cannot decode a result with status {status.value}")
        z = result.x
    else:
        z = np.asarray(result, dtype=float)
    if z.shape != (layout.n_var,):
        raise DimensionError(f"decision vector must have length {layout.n_var}, got {z.shape[0]}")

    model, N = layout.model, layout.N
    n_x, n_u = model.n_x, model.n_u
    off = layout.offsets
    states = z[off["x"]:off["x"] + (N + 1) * n_x].reshape(N + 1, n_x).copy()
    inputs = z[off["u"]:off["u"] + N * n_u].reshape(N, n_u).copy()

    if layout.kind == ControllerKind.EQUALITY:
        artificial = None
    elif layout.kind == ControllerKind.MPCT:
        artificial = SteadyStatePair(z[off["xs"]:off["xs"] + n_x], z[off["us"]:off["us"] + n_u])
    elif layout.kind == ControllerKind.PERIODIC:
        T_p = layout.period
        xs = z[off["xs"]:off["xs"] + T_p * n_x].reshape(T_p, n_x)
        us = z[off["us"]:off["us"] + T_p * n_u].reshape(T_p, n_u)
        artificial = tuple(SteadyStatePair(xs[j], us[j]) for j in range(T_p))
    else:
        w = layout.cfg.w
        part = lambda name, size: z[off[name]:off[name] + size]
        artificial = (
            HarmonicParams(part("xe", n_x), part("xs", n_x), part("xc", n_x), w),
            HarmonicParams(part("ue", n_u), part("us", n_u), part("uc", n_u), w),
        )

    return DecodedSolution(
        kind=layout.kind,
        predicted_states=states,
        predicted_inputs=inputs,
        artificial_ref=artificial,
        status=status,
        cost=prog.objective(z),
    )


def encode(prog: ConeProgram, solution: DecodedSolution) -> np.ndarray:
    """Inverse of decode: stack a solution into the program's decision vector."""
    layout = _layout_of(prog)
    model, N = layout.model, layout.N
    n_x, n_u = model.n_x, model.n_u
    off = layout.offsets
    states = np.asarray(solution.predicted_states, dtype=float)
    inputs = np.asarray(solution.predicted_inputs, dtype=float)
    if states.shape != (N + 1, n_x) or inputs.shape != (N, n_u):
        raise DimensionError(
            f"expected {N + 1}x{n_x} states and {N}x{n_u} inputs, got {states.shape} and {inputs.shape}"
        )

    z = np.zeros(layout.n_var)
    z[off["x"]:off["x"] + (N + 1) * n_x] = states.reshape(-1)
    z[off["u"]:off["u"] + N * n_u] = inputs.reshape(-1)
    art = solution.artificial_ref
    if layout.kind == ControllerKind.MPCT:
        z[off["xs"]:off["xs"] + n_x] = art.x
        z[off["us"]:off["us"] + n_u] = art.u
    elif layout.kind == ControllerKind.PERIODIC:
        z[off["xs"]:off["xs"] + layout.period * n_x] = np.concatenate([p.x for p in art])
        z[off["us"]:off["us"] + layout.period * n_u] = np.concatenate([p.u for p in art])
    elif layout.kind == ControllerKind.HMPC:
        x_h, u_h = art
        for name, vec in (("xe", x_h.v_e), ("xs", x_h.v_s), ("xc", x_h.v_c)):
            z[off[name]:off[name] + n_x] = vec
        for name, vec in (("ue", u_h.v_e), ("us", u_h.v_s), ("uc", u_h.v_c)):
            z[off[name]:off[name] + n_u] = vec
    return z


def shift_solution(solution: DecodedSolution) -> DecodedSolution:
    """One-step receding shift: trajectories advance with the last block duplicated."""
    states = np.vstack([solution.predicted_states[1:], solution.predicted_states[-1:]])
    inputs = np.vstack([solution.predicted_inputs[1:], solution.predicted_inputs[-1:]])
    art = solution.artificial_ref
    if solution.kind == ControllerKind.PERIODIC:
        art = tuple(art[1:]) + (art[0],)
    elif solution.kind == ControllerKind.HMPC:
        art = (shift_harmonic(art[0], 1), shift_harmonic(art[1], 1))
    return replace(solution, predicted_states=states, predicted_inputs=inputs, artificial_ref=art)


def warm_start_from(prog: ConeProgram, decoded: DecodedSolution) -> WarmStart:
    return WarmStart(encode(prog, shift_solution(decoded)))
