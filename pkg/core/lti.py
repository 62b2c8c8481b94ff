"""
LTI prediction model x(t+1) = A x(t) + B u(t) with coupled input-output
constraints y_lo <= E x(t) + F u(t) <= y_hi.

Also hosts the steady-state admissibility predicate and the controllability
index used as the horizon lower bound by the tracking formulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from core.errors import DimensionError, ModelValidationError, UncontrollableModelError

# Absolute residual tolerance for "x = A x + B u" style equality checks.
EPS_EQ = 1e-9


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if name in ("B",) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got array with ndim={arr.ndim}")
    arr.setflags(write=False)
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValidationReport:
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


@dataclass(frozen=True, eq=False)
class LtiModel:
    """
    Matrices of the prediction model and its constraint band.

    Construction only coerces the inputs to read-only float arrays; use
    `LtiModel.create` (or `require_valid_model`) to also enforce the
    structural assumptions reported by `validate_model`.
    """
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    F: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "E", _as_matrix(self.E, "E"))
        object.__setattr__(self, "F", _as_matrix(self.F, "F"))
        object.__setattr__(self, "y_lo", _as_vector(self.y_lo, "y_lo"))
        object.__setattr__(self, "y_hi", _as_vector(self.y_hi, "y_hi"))

    @classmethod
    def create(cls, A, B, E, F, y_lo, y_hi) -> "LtiModel":
        model = cls(A, B, E, F, y_lo, y_hi)
        require_valid_model(model)
        return model

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.E.shape[0]

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.E @ x + self.F @ u

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ u

    def to_document(self) -> dict:
        """Row-major nested lists, the layout used by scenario files."""
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "E": self.E.tolist(),
            "F": self.F.tolist(),
            "y_lo": self.y_lo.tolist(),
            "y_hi": self.y_hi.tolist(),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "LtiModel":
        return cls.create(doc["A"], doc["B"], doc["E"], doc["F"], doc["y_lo"], doc["y_hi"])


@dataclass(frozen=True, eq=False)
class SteadyStatePair:
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "u", _as_vector(self.u, "u"))


def _controllability_matrix(A: np.ndarray, B: np.ndarray, blocks: int) -> np.ndarray:
    cols = [B]
    for _ in range(blocks - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def _is_controllable(A: np.ndarray, B: np.ndarray) -> bool:
    n_x = A.shape[0]
    return np.linalg.matrix_rank(_controllability_matrix(A, B, n_x)) == n_x


def validate_model(model: LtiModel) -> ValidationReport:
    """Collect every violated structural assumption; never raises."""
    problems: List[str] = []
    A, B, E, F = model.A, model.B, model.E, model.F

    if A.shape[0] < 1 or A.shape[0] != A.shape[1]:
        problems.append(f"dimension mismatch: A must be square and non-empty, got {A.shape}")
    n_x = A.shape[0]
    if B.shape[0] != n_x or B.shape[1] < 1:
        problems.append(f"dimension mismatch: B must be {n_x}x(n_u>=1), got {B.shape}")
    if E.shape[1] != n_x or E.shape[0] < 1:
        problems.append(f"dimension mismatch: E must be (n_y>=1)x{n_x}, got {E.shape}")
    n_y = E.shape[0]
    if F.shape != (n_y, B.shape[1]):
        problems.append(f"dimension mismatch: F must be {n_y}x{B.shape[1]}, got {F.shape}")
    if model.y_lo.shape != (n_y,) or model.y_hi.shape != (n_y,):
        problems.append(
            f"dimension mismatch: bounds must have length {n_y}, "
            f"got {model.y_lo.shape[0]} and {model.y_hi.shape[0]}"
        )

    # Remaining checks need consistent shapes.
    if problems:
        return ValidationReport(problems)

    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
            and np.all(np.isfinite(E)) and np.all(np.isfinite(F))):
        problems.append("non-finite entries in A, B, E or F")
    bad_rows = np.flatnonzero(~(model.y_lo < model.y_hi))
    if bad_rows.size:
        problems.append(f"bounds not strictly ordered (y_lo < y_hi fails at rows {bad_rows.tolist()})")
    if not problems and not _is_controllable(A, B):
        problems.append("uncontrollable: rank of [B, AB, ..., A^(n_x-1)B] is below n_x")
    return ValidationReport(problems)


def require_valid_model(model: LtiModel) -> LtiModel:
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError(report)
    return model


def check_pair_dimensions(model: LtiModel, x: np.ndarray, u: np.ndarray, what: str = "pair") -> None:
    if x.shape != (model.n_x,) or u.shape != (model.n_u,):
        raise DimensionError(
            f"{what}: expected x of length {model.n_x} and u of length {model.n_u}, "
            f"got {x.shape[0]} and {u.shape[0]}"
        )


def is_admissible_steady_state(model: LtiModel, pair: SteadyStatePair, sigma: float = 0.0) -> bool:
    """
    True iff x = A x + B u within EPS_EQ and the output lies in the
    sigma-tightened band y_lo + sigma <= E x + F u <= y_hi - sigma.
    """
    check_pair_dimensions(model, pair.x, pair.u, "steady-state pair")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    residual = pair.x - model.step(pair.x, pair.u)
    if np.max(np.abs(residual)) > EPS_EQ:
        return False
    y = model.output(pair.x, pair.u)
    return bool(np.all(y >= model.y_lo + sigma) and np.all(y <= model.y_hi - sigma))


def controllability_index(model: LtiModel) -> int:
    """Smallest j with rank [B, AB, ..., A^(j-1) B] = n_x."""
    n_x = model.n_x
    cols = model.B
    block = model.B
    for j in range(1, n_x + 1):
        if np.linalg.matrix_rank(cols) == n_x:
            return j
        block = model.A @ block
        cols = np.hstack([cols, block])
    raise UncontrollableModelError(
        f"(A, B) is not controllable: rank stays below n_x={n_x} after {n_x} blocks"
    )


def output_violation(model: LtiModel, x: np.ndarray, u: np.ndarray) -> float:
    """Largest amount by which E x + F u leaves [y_lo, y_hi]; 0 when inside."""
    y = model.output(x, u)
    return float(max(0.0, np.max(y - model.y_hi), np.max(model.y_lo - y)))
