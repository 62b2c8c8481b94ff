"""
Single-frequency harmonic signals v(t) = v_e + v_s sin(w t) + v_c cos(w t).

A harmonic state/input pair (x_h, u_h) is admissible for the LTI model when
it lies in

    D: x_e = A x_e + B u_e
       x_s cos(w) - x_c sin(w) = A x_s + B u_s
       x_s sin(w) + x_c cos(w) = A x_c + B u_c

    C: for every output row i, with y_* = E x_* + F u_*,
       ||(y_s(i), y_c(i))|| <= y_hi(i) - sigma - y_e(i)
       ||(y_s(i), y_c(i))|| <= y_e(i) - y_lo(i) - sigma

D makes the signal a trajectory of the model; C keeps it inside the
sigma-tightened band for all t. The sampling oracle below checks the same
two facts directly in the time domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.errors import DimensionError, FrequencyMismatchError
from core.lti import EPS_EQ, LtiModel

DEFAULT_ORACLE_HORIZON = 1000
_FREQ_TOL = 1e-12
_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class HarmonicParams:
    """
    Bias, sine and cosine vectors of one harmonic signal plus its base
    frequency in radians per sample. w = 0 is only meaningful for the
    MPCT-reduction mode of the harmonic controller.
    """
    v_e: np.ndarray
    v_s: np.ndarray
    v_c: np.ndarray
    w: float

    def __post_init__(self):
        for name in ("v_e", "v_s", "v_c"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.v_e.shape == self.v_s.shape == self.v_c.shape):
            raise DimensionError(
                f"harmonic vectors must share one length, got {self.v_e.shape[0]}, "
                f"{self.v_s.shape[0]} and {self.v_c.shape[0]}"
            )
        w = float(self.w)
        if not np.isfinite(w) or w < 0:
            raise ValueError(f"base frequency must be finite and >= 0, got {self.w}")
        object.__setattr__(self, "w", w)

    @classmethod
    def constant(cls, value, w: float) -> "HarmonicParams":
        value = np.asarray(value, dtype=float).reshape(-1)
        return cls(value, np.zeros_like(value), np.zeros_like(value), w)

    @property
    def dim(self) -> int:
        return self.v_e.shape[0]

    @property
    def amplitude(self) -> np.ndarray:
        """Per-component peak deviation from the bias, ||(v_s(i), v_c(i))||."""
        return np.hypot(self.v_s, self.v_c)


def evaluate(params: HarmonicParams, t: int) -> np.ndarray:
    return params.v_e + params.v_s * np.sin(params.w * t) + params.v_c * np.cos(params.w * t)


def sample(params: HarmonicParams, times) -> np.ndarray:
    """Rows are evaluate(params, t) for each t in `times`."""
    times = np.asarray(times, dtype=float)
    return (params.v_e[None, :]
            + np.outer(np.sin(params.w * times), params.v_s)
            + np.outer(np.cos(params.w * times), params.v_c))


def is_degenerate_frequency(w: float, tol: float = 1e-9) -> bool:
    """True for w = 0 or a multiple of 2*pi, where sin(w t) and cos(w t) are constant."""
    r = np.mod(float(w), 2.0 * np.pi)
    return bool(r <= tol or 2.0 * np.pi - r <= tol)


def shift_harmonic(params: HarmonicParams, steps: float) -> HarmonicParams:
    """
    Re-anchor in time: the result evaluated at t equals `params` evaluated at
    t + steps. Fractional steps are allowed (a pure phase rotation).
    """
    c, s = np.cos(params.w * steps), np.sin(params.w * steps)
    return HarmonicParams(
        params.v_e,
        params.v_s * c - params.v_c * s,
        params.v_s * s + params.v_c * c,
        params.w,
    )


def _check_pair(x_params: HarmonicParams, u_params: HarmonicParams, model: LtiModel) -> None:
    if abs(x_params.w - u_params.w) > _FREQ_TOL:
        raise FrequencyMismatchError(
            f"state and input harmonics use different frequencies: {x_params.w} vs {u_params.w}"
        )
    if x_params.dim != model.n_x or u_params.dim != model.n_u:
        raise DimensionError(
            f"expected harmonic state of length {model.n_x} and input of length {model.n_u}, "
            f"got {x_params.dim} and {u_params.dim}"
        )


def output_params(x_params: HarmonicParams, u_params: HarmonicParams, model: LtiModel) -> HarmonicParams:
    _check_pair(x_params, u_params, model)
    return HarmonicParams(
        model.E @ x_params.v_e + model.F @ u_params.v_e,
        model.E @ x_params.v_s + model.F @ u_params.v_s,
        model.E @ x_params.v_c + model.F @ u_params.v_c,
        x_params.w,
    )


def dynamics_residual(
    x_params: HarmonicParams,
    u_params: HarmonicParams,
    model: LtiModel,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residuals of the bias, sine and cosine rows of D (all zero inside D)."""
    _check_pair(x_params, u_params, model)
    A, B = model.A, model.B
    c, s = np.cos(x_params.w), np.sin(x_params.w)
    x_e, x_s, x_c = x_params.v_e, x_params.v_s, x_params.v_c
    r_e = x_e - (A @ x_e + B @ u_params.v_e)
    r_s = (x_s * c - x_c * s) - (A @ x_s + B @ u_params.v_s)
    r_c = (x_s * s + x_c * c) - (A @ x_c + B @ u_params.v_c)
    return r_e, r_s, r_c


def in_dynamics_set(x_params: HarmonicParams, u_params: HarmonicParams, model: LtiModel,
                    eps: float = EPS_EQ) -> bool:
    return all(np.max(np.abs(r), initial=0.0) <= eps for r in dynamics_residual(x_params, u_params, model))


def constraint_margins(
    x_params: HarmonicParams,
    u_params: HarmonicParams,
    model: LtiModel,
    sigma: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-output (upper, lower) margins of the cone constraints of C.
    Membership in C is every margin >= 0.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    y = output_params(x_params, u_params, model)
    amplitude = y.amplitude
    upper = (model.y_hi - sigma - y.v_e) - amplitude
    lower = (y.v_e - model.y_lo - sigma) - amplitude
    return upper, lower


def in_constraint_set(x_params: HarmonicParams, u_params: HarmonicParams, model: LtiModel,
                      sigma: float = 0.0, eps: float = 0.0) -> bool:
    upper, lower = constraint_margins(x_params, u_params, model, sigma)
    return bool(np.all(upper >= -eps) and np.all(lower >= -eps))


def is_admissible_harmonic(
    x_params: HarmonicParams,
    u_params: HarmonicParams,
    model: LtiModel,
    sigma: float = 0.0,
    horizon: int = DEFAULT_ORACLE_HORIZON,
) -> bool:
    """
    Time-domain check for t = 0..horizon: x(t+1) = A x(t) + B u(t) and the
    sigma-tightened output band, both within EPS_EQ.
    """
    _check_pair(x_params, u_params, model)
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    times = np.arange(horizon + 2)
    X = sample(x_params, times)
    U = sample(u_params, times[:-1])
    X_now = X[:-1]

    scale = max(1.0, np.max(np.abs(X)), np.max(np.abs(U)))
    dyn = X[1:] - (X_now @ model.A.T + U @ model.B.T)
    if np.max(np.abs(dyn)) > EPS_EQ * scale:
        return False

    Y = X_now @ model.E.T + U @ model.F.T
    upper_ok = np.all(Y <= model.y_hi - sigma + EPS_EQ)
    lower_ok = np.all(Y >= model.y_lo + sigma - EPS_EQ)
    return bool(upper_ok and lower_ok)


def _solve_unique(M: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(M) > _COND_LIMIT:
        raise ValueError(f"{what} is not uniquely determined (singular system)")
    return np.linalg.solve(M, rhs)


def harmonic_state_from_input(model: LtiModel, u_params: HarmonicParams, x_e=None) -> HarmonicParams:
    """
    The harmonic state making (x_h, u_h) a member of D.

    The sine/cosine part needs no eigenvalue of A at exp(+-i w). The bias
    needs I - A invertible unless `x_e` is given; models with integrators
    (I - A singular) pass the bias of a known steady pair instead.
    """
    if u_params.dim != model.n_u:
        raise DimensionError(f"expected harmonic input of length {model.n_u}, got {u_params.dim}")
    n = model.n_x
    A, B = model.A, model.B
    I = np.eye(n)
    c, s = np.cos(u_params.w), np.sin(u_params.w)
    if x_e is None:
        x_e = _solve_unique(I - A, B @ u_params.v_e, "harmonic bias")
    else:
        x_e = np.asarray(x_e, dtype=float).reshape(-1)
        if x_e.shape != (n,):
            raise DimensionError(f"expected bias state of length {n}, got {x_e.shape[0]}")
    block = np.block([[c * I - A, -s * I], [s * I, c * I - A]])
    sc = _solve_unique(
        block,
        np.concatenate([B @ u_params.v_s, B @ u_params.v_c]),
        f"harmonic sine/cosine part at w={u_params.w}",
    )
    return HarmonicParams(x_e, sc[:n], sc[n:], u_params.w)
