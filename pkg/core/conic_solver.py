"""
ADMM operator-splitting solver for sparse conic programs

    minimize    1/2 x'Px + q'x + c
    subject to  Aeq x = beq
                lo <= Abox x <= hi
                G_j x + o_j in K3      (K3 = {(t, s) in R x R^2 : ||s|| <= t})

All constraint rows are stacked into one matrix A and split as A x = z,
z in Cset, following the OSQP iteration (KKT system factored once,
over-relaxation). Quadratic programs are the special case with no cone
blocks.

Optional Ruiz equilibration (`SolverConfig.scaling` passes) iterates on
D P D, E A D; the three rows of a cone block share one row factor so the
scaled block still lives in K3. Optional adaptive penalty
(`SolverConfig.adaptive_rho`) rebalances rho from the residual ratio and
refactors. Termination, infeasibility and polishing always work on the
unscaled program.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from core.errors import DimensionError, SolverFailure
from core.logger import get_logger

logger = get_logger(__name__)

# Equality rows get a stiffer penalty, as in OSQP.
EQUALITY_RHO_SCALE = 1e3
POLISH_DELTA = 1e-6
POLISH_REFINE_ITER = 3
EARLY_POLISH_EVERY = 25
EARLY_POLISH_FACTOR = 1e3
_LOG_EVERY = 200

# Ruiz norms outside [MIN_SCALING, MAX_SCALING] are clipped (OSQP limits).
MIN_SCALING = 1e-4
MAX_SCALING = 1e4

ADAPTIVE_RHO_EVERY = 25
ADAPTIVE_RHO_TOLERANCE = 5.0
RHO_MIN = 1e-6
RHO_MAX = 1e6
_DIVISION_TOL = 1e-30


class SolverStatus(str, Enum):
    SOLVED = "solved"
    MAX_ITER_REACHED = "max_iter_reached"
    PRIMAL_INFEASIBLE = "primal_infeasible_certificate"


@dataclass(frozen=True, eq=False)
class SocBlock:
    """Rows selector @ x + offset = (y0, y1) constrained to ||y1|| <= y0."""
    selector: sparse.csr_matrix
    offset: np.ndarray

    def __post_init__(self):
        sel = sparse.csr_matrix(self.selector, dtype=float)
        off = np.asarray(self.offset, dtype=float).reshape(-1)
        if sel.shape[0] != 3 or off.shape != (3,):
            raise DimensionError(
                f"second-order cone blocks select exactly 3 scalars, got selector {sel.shape} and offset {off.shape}"
            )
        object.__setattr__(self, "selector", sel)
        object.__setattr__(self, "offset", off)


def _as_csc(matrix) -> sparse.csc_matrix:
    # Keep identity for matrices that are already CSC floats; solver caches key on it.
    if isinstance(matrix, sparse.csc_matrix) and matrix.dtype == np.float64:
        return matrix
    return sparse.csc_matrix(matrix, dtype=float)


def _csc(matrix, shape: Tuple[int, int], name: str) -> sparse.csc_matrix:
    if matrix is None:
        return sparse.csc_matrix(shape)
    out = _as_csc(matrix)
    if out.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {out.shape}")
    return out


def _vec(value, size: int, name: str) -> np.ndarray:
    out = np.zeros(size) if value is None else np.asarray(value, dtype=float).reshape(-1)
    if out.shape != (size,):
        raise DimensionError(f"{name} must have length {size}, got {out.shape[0]}")
    out.setflags(write=False)
    return out


# --- Projections ---

def project_box(v, lo, hi) -> np.ndarray:
    return np.minimum(np.maximum(np.asarray(v, dtype=float), lo), hi)


def _project_soc_rows(V: np.ndarray) -> np.ndarray:
    """Project each row (t, s1, s2) of V onto K3."""
    t = V[:, 0]
    s = V[:, 1:]
    ns = np.sqrt(np.sum(s * s, axis=1))
    out = V.copy()
    polar = ns <= -t
    out[polar] = 0.0
    outside = ~polar & (ns > t)
    if np.any(outside):
        a = 0.5 * (ns[outside] + t[outside])
        out[outside, 0] = a
        out[outside, 1:] = s[outside] * (a / ns[outside])[:, None]
    return out


def project_soc(y0: float, y1) -> Tuple[float, np.ndarray]:
    """Euclidean projection of (y0, y1) onto {(z0, z1): ||z1|| <= z0}."""
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    if y1.shape != (2,):
        raise DimensionError(f"cone tail must have length 2, got {y1.shape[0]}")
    row = _project_soc_rows(np.concatenate([[float(y0)], y1])[None, :])[0]
    return float(row[0]), row[1:]


@dataclass(frozen=True, eq=False)
class _ConstraintSet:
    """The set Cset the slack z lives in: equalities, boxes, shifted cones (row order of A)."""
    beq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    soc_offset: np.ndarray

    @property
    def m_eq(self) -> int:
        return self.beq.shape[0]

    @property
    def m_box(self) -> int:
        return self.lo.shape[0]

    def scaled(self, row_scale: np.ndarray) -> "_ConstraintSet":
        """The set E * Cset for a positive row scaling E (uniform inside each cone block)."""
        m_eq, m_box = self.m_eq, self.m_box
        e_box = row_scale[m_eq:m_eq + m_box]
        return _ConstraintSet(
            beq=row_scale[:m_eq] * self.beq,
            lo=e_box * self.lo,
            hi=e_box * self.hi,
            soc_offset=row_scale[m_eq + m_box:] * self.soc_offset,
        )

    def project(self, v: np.ndarray) -> np.ndarray:
        m_eq, m_box = self.m_eq, self.m_box
        out = np.empty_like(v)
        out[:m_eq] = self.beq
        out[m_eq:m_eq + m_box] = project_box(v[m_eq:m_eq + m_box], self.lo, self.hi)
        if self.soc_offset.size:
            shifted = (v[m_eq + m_box:] + self.soc_offset).reshape(-1, 3)
            out[m_eq + m_box:] = _project_soc_rows(shifted).reshape(-1) - self.soc_offset
        return out

    def support(self, d: np.ndarray, tol: float) -> float:
        """sup over the set of d'z; +inf when unbounded in direction d."""
        m_eq, m_box = self.m_eq, self.m_box
        value = float(self.beq @ d[:m_eq])

        d_box = d[m_eq:m_eq + m_box]
        up = d_box > tol
        down = d_box < -tol
        if np.any(np.isinf(self.hi[up])) or np.any(np.isinf(self.lo[down])):
            return np.inf
        value += float(self.hi[up] @ d_box[up] + self.lo[down] @ d_box[down])

        if self.soc_offset.size:
            D = d[m_eq + m_box:].reshape(-1, 3)
            tail = np.sqrt(np.sum(D[:, 1:] ** 2, axis=1))
            if np.any(tail > -D[:, 0] + tol):
                return np.inf
            value -= float(self.soc_offset @ d[m_eq + m_box:])
        return value


@dataclass(frozen=True, eq=False)
class ConeProgram:
    P: sparse.csc_matrix
    q: np.ndarray
    Aeq: Optional[sparse.csc_matrix] = None
    beq: Optional[np.ndarray] = None
    box_rows: Optional[sparse.csc_matrix] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    soc_blocks: Tuple[SocBlock, ...] = ()
    constant: float = 0.0
    # Builder metadata (variable layout, model, weights); opaque to the solver.
    layout: Any = field(default=None, repr=False)

    def __post_init__(self):
        P = _as_csc(self.P)
        n = P.shape[0]
        if P.shape != (n, n):
            raise DimensionError(f"P must be square, got {P.shape}")
        if n and abs(P - P.T).max() > 1e-10 * max(1.0, abs(P).max()):
            raise ValueError("P must be symmetric")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", _vec(self.q, n, "q"))

        m_eq = 0 if self.Aeq is None else np.shape(self.Aeq)[0]
        object.__setattr__(self, "Aeq", _csc(self.Aeq, (m_eq, n), "Aeq"))
        object.__setattr__(self, "beq", _vec(self.beq, m_eq, "beq"))

        m_box = 0 if self.box_rows is None else np.shape(self.box_rows)[0]
        object.__setattr__(self, "box_rows", _csc(self.box_rows, (m_box, n), "box_rows"))
        lo = _vec(self.lo if self.lo is not None else np.full(m_box, -np.inf), m_box, "lo")
        hi = _vec(self.hi if self.hi is not None else np.full(m_box, np.inf), m_box, "hi")
        if np.any(lo > hi):
            raise ValueError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

        blocks = tuple(self.soc_blocks)
        for block in blocks:
            if block.selector.shape[1] != n:
                raise DimensionError(f"cone selector must have {n} columns, got {block.selector.shape[1]}")
        object.__setattr__(self, "soc_blocks", blocks)

        for name in ("q", "beq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if not (np.all(np.isfinite(P.data)) and np.all(np.isfinite(self.Aeq.data))
                and np.all(np.isfinite(self.box_rows.data))):
            raise ValueError("matrix entries must be finite")

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m_eq(self) -> int:
        return self.Aeq.shape[0]

    @property
    def m_box(self) -> int:
        return self.box_rows.shape[0]

    @property
    def m_soc(self) -> int:
        return 3 * len(self.soc_blocks)

    @property
    def m(self) -> int:
        return self.m_eq + self.m_box + self.m_soc

    @cached_property
    def constraint_matrix(self) -> sparse.csc_matrix:
        blocks = [self.Aeq, self.box_rows] + [b.selector for b in self.soc_blocks]
        return sparse.vstack(blocks, format="csc")

    @cached_property
    def soc_offset(self) -> np.ndarray:
        if not self.soc_blocks:
            return np.zeros(0)
        return np.concatenate([b.offset for b in self.soc_blocks])

    @cached_property
    def constraint_set(self) -> _ConstraintSet:
        return _ConstraintSet(self.beq, self.lo, self.hi, self.soc_offset)

    def same_structure(self, other: "ConeProgram") -> bool:
        """True when `other` shares this program's matrices (only vectors differ)."""
        if self.P is not other.P or self.Aeq is not other.Aeq or self.box_rows is not other.box_rows:
            return False
        if len(self.soc_blocks) != len(other.soc_blocks):
            return False
        return all(a.selector is b.selector for a, b in zip(self.soc_blocks, other.soc_blocks))

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x + self.constant)


@dataclass(frozen=True, eq=False)
class WarmStart:
    x: np.ndarray
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    max_iter: int = 20000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    warm_start: Optional[Any] = field(default=None, compare=False)
    polish: bool = True
    alpha: float = 1.6
    sigma: float = 1e-6
    eps_infeasible: float = 1e-5
    divergence_threshold: float = 1e8
    iteration_log: Optional[str] = None
    # Ruiz equilibration passes; 0 iterates on the data as given.
    scaling: int = 0
    adaptive_rho: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("eps_abs and eps_rel must be > 0")
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.scaling < 0:
            raise ValueError(f"scaling must be >= 0, got {self.scaling}")


@dataclass(frozen=True, eq=False)
class SolverResult:
    status: SolverStatus
    x: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    y: np.ndarray
    z: np.ndarray
    objective: float
    polished: bool = False

    @property
    def solved(self) -> bool:
        return self.status == SolverStatus.SOLVED

    def as_warm_start(self) -> WarmStart:
        return WarmStart(self.x, self.z, self.y)


def kkt_residuals(prog: ConeProgram, x, duals) -> Tuple[float, float]:
    """
    Primal residual: inf-norm distance of A x to the constraint set.
    Dual residual: inf-norm of P x + q + A' y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(duals, dtype=float)
    if x.shape != (prog.n,) or y.shape != (prog.m,):
        raise DimensionError(f"expected x of length {prog.n} and duals of length {prog.m}")
    A = prog.constraint_matrix
    Ax = A @ x
    primal = float(np.max(np.abs(Ax - prog.constraint_set.project(Ax)), initial=0.0))
    dual = float(np.max(np.abs(prog.P @ x + prog.q + A.T @ y), initial=0.0))
    return primal, dual


def _limit(norms: np.ndarray) -> np.ndarray:
    out = np.where(norms < MIN_SCALING, 1.0, norms)
    return np.minimum(out, MAX_SCALING)


def _col_norms(M: sparse.csc_matrix) -> np.ndarray:
    if M.shape[0] == 0:
        return np.zeros(M.shape[1])
    return np.asarray(abs(M).max(axis=0).todense()).reshape(-1)


def _row_norms(M: sparse.csc_matrix) -> np.ndarray:
    if M.shape[1] == 0:
        return np.zeros(M.shape[0])
    return np.asarray(abs(M).max(axis=1).todense()).reshape(-1)


def ruiz_equilibration(prog: ConeProgram, passes: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Modified Ruiz equilibration of the KKT matrix [[P, A'], [A, 0]].

    Returns (D, E, c): variable scaling, row scaling and cost scaling, so
    the solver iterates on c D P D, c D q and E A D. The three rows of each
    cone block get the mean of their factors.
    """
    n, m = prog.n, prog.m
    D, E, c = np.ones(n), np.ones(m), 1.0
    if passes == 0:
        return D, E, c
    soc_start = prog.m_eq + prog.m_box
    P = prog.P.copy()
    A = prog.constraint_matrix.copy()
    q = np.array(prog.q)
    for _ in range(passes):
        d = 1.0 / np.sqrt(_limit(np.maximum(_col_norms(P), _col_norms(A))))
        e = 1.0 / np.sqrt(_limit(_row_norms(A)))
        if m > soc_start:
            block_mean = e[soc_start:].reshape(-1, 3).mean(axis=1)
            e[soc_start:] = np.repeat(block_mean, 3)
        Dt, Et = sparse.diags(d), sparse.diags(e)
        P = (Dt @ P @ Dt).tocsc()
        A = (Et @ A @ Dt).tocsc()
        q = d * q
        D, E = D * d, E * e

        mean_col = float(np.mean(_col_norms(P))) if n else 0.0
        gamma = 1.0 / float(_limit(np.array([max(mean_col, np.max(np.abs(q), initial=0.0))]))[0])
        P = gamma * P
        q = gamma * q
        c *= gamma
    return D, E, c


class AdmmSolver:
    """
    Solver workspace for one program structure.

    Owns the (scaled) factored KKT matrix and the ADMM iterates. `load`
    swaps in a program with the same matrices (new q / beq / lo / hi)
    without refactoring, `update` does the same from raw vectors; a
    structurally different program triggers a new setup. The penalty
    adapted during one solve carries over to the next.
    Not thread-safe: confine one instance to one thread of control.
    """

    def __init__(self, prog: ConeProgram, cfg: SolverConfig = SolverConfig()):
        self.cfg = cfg
        self.factorizations = 0
        self.rho_updates = 0
        self._setup(prog)

    @property
    def rho(self) -> float:
        return self._rho_scalar

    def _setup(self, prog: ConeProgram) -> None:
        cfg = self.cfg
        self.prog = prog
        self._A = prog.constraint_matrix
        self._At = self._A.T.tocsc()
        self._D, self._E, self._c = ruiz_equilibration(prog, cfg.scaling)
        D, E = sparse.diags(self._D), sparse.diags(self._E)
        self._P_bar = (self._c * (D @ prog.P @ D)).tocsc()
        self._A_bar = (E @ self._A @ D).tocsc()
        self._At_bar = self._A_bar.T.tocsc()
        self._factor(cfg.rho)
        self.factorizations += 1
        logger.debug(
            f"[SOLVER] factored KKT n={prog.n} m={prog.m} scaling={cfg.scaling}",
            extra={"console": False},
        )
        self._load_vectors(prog)
        self._xb = np.zeros(prog.n)
        self._zb = np.zeros(prog.m)
        self._yb = np.zeros(prog.m)

    def _factor(self, rho_scalar: float) -> None:
        prog = self.prog
        n, m = prog.n, prog.m
        rho = np.full(m, rho_scalar)
        rho[:prog.m_eq] *= EQUALITY_RHO_SCALE
        self._rho_scalar = rho_scalar
        self._rho = rho
        self._rho_inv = 1.0 / rho
        top_left = self._P_bar + self.cfg.sigma * sparse.eye(n, format="csc")
        if m:
            kkt = sparse.bmat([
                [top_left, self._At_bar],
                [self._A_bar, -sparse.diags(self._rho_inv)],
            ], format="csc")
        else:
            kkt = sparse.csc_matrix(top_left)
        self._kkt = spla.splu(kkt)

    def _load_vectors(self, prog: ConeProgram) -> None:
        self._q_bar = self._c * self._D * prog.q
        self._set_bar = prog.constraint_set.scaled(self._E)

    def load(self, prog: ConeProgram) -> None:
        if prog.same_structure(self.prog):
            self.prog = prog
            self._load_vectors(prog)
        else:
            self._setup(prog)

    def update(self, q=None, beq=None, lo=None, hi=None) -> None:
        """Change the vector data of the loaded program; the factorization is kept."""
        changes = {k: v for k, v in (("q", q), ("beq", beq), ("lo", lo), ("hi", hi)) if v is not None}
        if changes:
            self.load(replace(self.prog, **changes))

    def _unscaled(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._D * self._xb, self._zb / self._E, self._E * self._yb / self._c

    def _set_unscaled(self, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> None:
        self._xb = x / self._D
        self._zb = self._E * z
        self._yb = self._c * y / self._E

    def _warm(self, warm_start: Optional[Union[WarmStart, SolverResult, np.ndarray]]) -> None:
        prog = self.prog
        if warm_start is None:
            self._xb = np.zeros(prog.n)
            self._zb = np.zeros(prog.m)
            self._yb = np.zeros(prog.m)
            return
        if isinstance(warm_start, SolverResult):
            warm_start = warm_start.as_warm_start()
        elif isinstance(warm_start, np.ndarray):
            warm_start = WarmStart(warm_start)
        x = np.array(warm_start.x, dtype=float).reshape(-1)
        if x.shape != (prog.n,):
            raise DimensionError(f"warm start x must have length {prog.n}, got {x.shape[0]}")
        z = warm_start.z
        z = (np.array(z, dtype=float) if z is not None and np.shape(z) == (prog.m,)
             else prog.constraint_set.project(self._A @ x))
        y = warm_start.y
        y = np.array(y, dtype=float) if y is not None and np.shape(y) == (prog.m,) else np.zeros(prog.m)
        self._set_unscaled(x, z, y)

    def _residuals(self, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> Tuple[float, float, float, float]:
        prog, cfg = self.prog, self.cfg
        Ax = self._A @ x
        Px = prog.P @ x
        Aty = self._At @ y
        r_prim = float(np.max(np.abs(Ax - z), initial=0.0))
        r_dual = float(np.max(np.abs(Px + prog.q + Aty), initial=0.0))
        scale_prim = max(np.max(np.abs(Ax), initial=0.0), np.max(np.abs(z), initial=0.0))
        scale_dual = max(np.max(np.abs(Px), initial=0.0), np.max(np.abs(Aty), initial=0.0),
                         np.max(np.abs(prog.q), initial=0.0))
        eps_prim = cfg.eps_abs + cfg.eps_rel * scale_prim
        eps_dual = cfg.eps_abs + cfg.eps_rel * scale_dual
        return r_prim, r_dual, eps_prim, eps_dual

    def _is_primal_infeasible(self, delta_y: np.ndarray) -> bool:
        norm = np.max(np.abs(delta_y), initial=0.0)
        if norm <= 1e-12:
            return False
        d = delta_y / norm
        tol = self.cfg.eps_infeasible
        if np.max(np.abs(self._At @ d), initial=0.0) > tol:
            return False
        return self.prog.constraint_set.support(d, tol) < -tol

    def _adapt_rho(self) -> None:
        """OSQP rule: rho *= sqrt(relative primal / relative dual residual), scaled space."""
        x, z, y = self._xb, self._zb, self._yb
        Ax = self._A_bar @ x
        Px = self._P_bar @ x
        Aty = self._At_bar @ y
        prim = np.max(np.abs(Ax - z), initial=0.0) / (
            max(np.max(np.abs(Ax), initial=0.0), np.max(np.abs(z), initial=0.0)) + _DIVISION_TOL)
        dual = np.max(np.abs(Px + self._q_bar + Aty), initial=0.0) / (
            max(np.max(np.abs(Px), initial=0.0), np.max(np.abs(Aty), initial=0.0),
                np.max(np.abs(self._q_bar), initial=0.0)) + _DIVISION_TOL)
        rho_new = float(np.clip(self._rho_scalar * np.sqrt(prim / (dual + _DIVISION_TOL)), RHO_MIN, RHO_MAX))
        if rho_new > ADAPTIVE_RHO_TOLERANCE * self._rho_scalar or rho_new < self._rho_scalar / ADAPTIVE_RHO_TOLERANCE:
            logger.debug(f"[SOLVER] rho {self._rho_scalar:.3e} -> {rho_new:.3e}", extra={"console": False})
            self._factor(rho_new)
            self.rho_updates += 1

    def solve(
        self,
        warm_start: Optional[Union[WarmStart, SolverResult, np.ndarray]] = None,
        max_iter: Optional[int] = None,
    ) -> SolverResult:
        """Run ADMM on the loaded program; `max_iter` overrides the configured budget for this call."""
        cfg, prog = self.cfg, self.prog
        budget = cfg.max_iter if max_iter is None else int(max_iter)
        if budget < 1:
            raise ValueError(f"max_iter must be >= 1, got {budget}")
        if warm_start is None:
            warm_start = cfg.warm_start
        self._warm(warm_start)
        n = prog.n
        alpha, sigma = cfg.alpha, cfg.sigma

        log_rows: Optional[List[Tuple[int, float, float]]] = [] if cfg.iteration_log else None
        status = SolverStatus.MAX_ITER_REACHED
        best = None
        best_score = np.inf
        iteration = 0
        r_prim = r_dual = np.inf
        polished = False
        x_u, z_u, y_u = self._unscaled()

        for iteration in range(1, budget + 1):
            x, z, y = self._xb, self._zb, self._yb
            rho, rho_inv = self._rho, self._rho_inv
            rhs = np.concatenate([sigma * x - self._q_bar, z - rho_inv * y])
            sol = self._kkt.solve(rhs)
            x_tilde = sol[:n]
            z_tilde = z + rho_inv * (sol[n:] - y)

            x_new = alpha * x_tilde + (1.0 - alpha) * x
            z_relax = alpha * z_tilde + (1.0 - alpha) * z
            z_new = self._set_bar.project(z_relax + rho_inv * y)
            y_new = y + rho * (z_relax - z_new)
            delta_y = self._E * (y_new - y)
            self._xb, self._zb, self._yb = x_new, z_new, y_new

            x_u, z_u, y_u = self._unscaled()
            r_prim, r_dual, eps_prim, eps_dual = self._residuals(x_u, z_u, y_u)
            if log_rows is not None:
                log_rows.append((iteration, r_prim, r_dual))
            if iteration % _LOG_EVERY == 0:
                logger.debug(
                    f"[SOLVER] iter={iteration} r_prim={r_prim:.3e} r_dual={r_dual:.3e}",
                    extra={"console": False},
                )

            if r_prim <= eps_prim and r_dual <= eps_dual:
                status = SolverStatus.SOLVED
                break
            if self._is_primal_infeasible(delta_y) or np.max(np.abs(y_u), initial=0.0) > cfg.divergence_threshold:
                status = SolverStatus.PRIMAL_INFEASIBLE
                break

            # Near convergence the active set is usually settled; a polish that
            # already meets the tolerance ends the run.
            if (cfg.polish and iteration % EARLY_POLISH_EVERY == 0
                    and r_prim <= EARLY_POLISH_FACTOR * eps_prim and r_dual <= EARLY_POLISH_FACTOR * eps_dual):
                candidate = self._polish(z_u, y_u)
                if candidate is not None and candidate[3] <= eps_prim and candidate[4] <= eps_dual:
                    x_u, z_u, y_u, r_prim, r_dual = candidate
                    status = SolverStatus.SOLVED
                    polished = True
                    break

            score = max(r_prim / eps_prim, r_dual / eps_dual)
            if score < best_score:
                best_score = score
                best = (x_u, z_u, y_u, r_prim, r_dual)

            if cfg.adaptive_rho and iteration % ADAPTIVE_RHO_EVERY == 0:
                self._adapt_rho()

        if status == SolverStatus.MAX_ITER_REACHED and best is not None:
            x_u, z_u, y_u, r_prim, r_dual = best
            logger.warning(f"[SOLVER] max_iter={budget} reached; r_prim={r_prim:.3e} r_dual={r_dual:.3e}")
        elif status == SolverStatus.SOLVED and cfg.polish and not polished:
            candidate = self._polish(z_u, y_u)
            if candidate is not None and candidate[3] <= max(r_prim, 1e-9) and candidate[4] <= max(r_dual, 1e-9):
                x_u, z_u, y_u, r_prim, r_dual = candidate
                polished = True
            elif candidate is not None:
                logger.debug(
                    f"[SOLVER] polish rejected: r_prim {candidate[3]:.2e} vs {r_prim:.2e}, "
                    f"r_dual {candidate[4]:.2e} vs {r_dual:.2e}",
                    extra={"console": False},
                )
        elif status == SolverStatus.PRIMAL_INFEASIBLE:
            logger.info(f"[SOLVER] primal infeasibility detected at iteration {iteration}")
        self._set_unscaled(x_u, z_u, y_u)

        if log_rows is not None:
            _write_iteration_log(cfg.iteration_log, log_rows)

        return SolverResult(
            status=status,
            x=x_u.copy(),
            iterations=iteration,
            primal_residual=r_prim,
            dual_residual=r_dual,
            y=y_u.copy(),
            z=z_u.copy(),
            objective=prog.objective(x_u),
            polished=polished,
        )

    def _polish(self, z: np.ndarray, y: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, float, float]]:
        """
        Re-solve the equality-constrained problem on the active set guessed
        from the (unscaled) iterate. Returns (x, z, y, r_prim, r_dual) or None.

        Active boxes are fixed at their bound; cones whose slack sits at the
        apex are fixed at the apex. A cone active on its curved surface makes
        the guess non-linear, so polishing is skipped.
        """
        prog = self.prog
        n, m_eq, m_box = prog.n, prog.m_eq, prog.m_box

        z_box, y_box = z[m_eq:m_eq + m_box], y[m_eq:m_eq + m_box]
        low = (z_box - prog.lo) < -y_box
        up = ((prog.hi - z_box) < y_box) & ~low

        apex: List[int] = []
        if prog.soc_blocks:
            Z = (z[m_eq + m_box:] + prog.soc_offset).reshape(-1, 3)
            Y = y[m_eq + m_box:].reshape(-1, 3)
            for j in range(len(prog.soc_blocks)):
                y_norm = np.linalg.norm(Y[j])
                if Z[j, 0] - np.linalg.norm(Z[j, 1:]) > y_norm:
                    continue
                if np.linalg.norm(Z[j]) <= y_norm:
                    apex.append(j)
                else:
                    return None

        rows = [prog.Aeq, prog.box_rows[np.flatnonzero(low)], prog.box_rows[np.flatnonzero(up)]]
        rhs_b = [prog.beq, prog.lo[low], prog.hi[up]]
        for j in apex:
            rows.append(prog.soc_blocks[j].selector)
            rhs_b.append(-prog.soc_blocks[j].offset)
        A_red = sparse.vstack(rows, format="csc")
        b_red = np.concatenate(rhs_b)
        k = A_red.shape[0]

        if k:
            K0 = sparse.bmat([[prog.P, A_red.T], [A_red, sparse.csc_matrix((k, k))]], format="csc")
        else:
            K0 = prog.P
        reg = sparse.diags(np.concatenate([np.full(n, POLISH_DELTA), np.full(k, -POLISH_DELTA)]))
        try:
            factor = spla.splu((K0 + reg).tocsc())
        except RuntimeError:
            return None
        rhs = np.concatenate([-prog.q, b_red])
        sol = factor.solve(rhs)
        for _ in range(POLISH_REFINE_ITER):
            sol = sol + factor.solve(rhs - K0 @ sol)
        if not np.all(np.isfinite(sol)):
            return None

        x_pol = sol[:n]
        y_red = sol[n:]
        y_pol = np.zeros(prog.m)
        y_pol[:m_eq] = y_red[:m_eq]
        cursor = m_eq
        low_idx = m_eq + np.flatnonzero(low)
        up_idx = m_eq + np.flatnonzero(up)
        y_pol[low_idx] = y_red[cursor:cursor + low_idx.size]
        cursor += low_idx.size
        y_pol[up_idx] = y_red[cursor:cursor + up_idx.size]
        cursor += up_idx.size
        for j in apex:
            start = m_eq + m_box + 3 * j
            y_pol[start:start + 3] = y_red[cursor:cursor + 3]
            cursor += 3

        sign_tol = 1e-7 * max(1.0, np.max(np.abs(y_pol), initial=0.0))
        if np.any(y_pol[low_idx] > sign_tol) or np.any(y_pol[up_idx] < -sign_tol):
            return None
        for j in apex:
            start = m_eq + m_box + 3 * j
            yj = y_pol[start:start + 3]
            if np.linalg.norm(yj[1:]) > -yj[0] + sign_tol:
                return None

        Ax = self._A @ x_pol
        z_pol = prog.constraint_set.project(Ax)
        pol_prim = float(np.max(np.abs(Ax - z_pol), initial=0.0))
        pol_dual = float(np.max(np.abs(prog.P @ x_pol + prog.q + self._At @ y_pol), initial=0.0))
        return x_pol, z_pol, y_pol, pol_prim, pol_dual


def _write_iteration_log(path: str, rows: Sequence[Tuple[int, float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "primal_residual", "dual_residual"])
        for iteration, r_prim, r_dual in rows:
            writer.writerow([iteration, repr(r_prim), repr(r_dual)])


def solve(prog: ConeProgram, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """One-shot solve; build an AdmmSolver directly to reuse the factorization."""
    return AdmmSolver(prog, cfg).solve()


def require_solved(result: SolverResult, what: str = "program") -> SolverResult:
    if not result.solved:
        raise SolverFailure(f"{what} not solved: status={result.status.value}")
    return result
