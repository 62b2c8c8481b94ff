"""
Ball-and-plate benchmark: nonlinear dynamics, RK4 plant integration and the
zero-order-hold linearization around the origin.

State ordering: (p1, dp1, th1, dth1, p2, dp2, th2, dth2).
Input ordering: (ddth1, ddth2), plate angular accelerations.
Constraint rows: (p1, dp1, th1, ddth1, p2, dp2, th2, ddth2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import expm

from core.errors import DimensionError
from core.lti import LtiModel

N_STATE = 8
N_INPUT = 2

POSITION_INDICES: Tuple[int, int] = (0, 4)
VELOCITY_INDICES: Tuple[int, int] = (1, 5)

POSITION_BOUND = 0.3
VELOCITY_BOUND = 0.1
ANGLE_BOUND = np.pi / 4
INPUT_BOUND = 0.1

DEFAULT_SUBSTEPS = 10


@dataclass(frozen=True)
class BallPlateParams:
    m: float = 0.05
    r: float = 0.01
    I_b: float = 2e-6
    g: float = 9.81
    sample_time: float = 0.2

    def __post_init__(self):
        for name in ("m", "r", "I_b", "g", "sample_time"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"BallPlateParams.{name} must be strictly positive, got {value}")

    @property
    def coupling(self) -> float:
        """m / (m + I_b / r^2), the rolling-ball mass factor."""
        return self.m / (self.m + self.I_b / self.r ** 2)


def _check_sizes(state: np.ndarray, input: np.ndarray) -> None:
    if state.shape != (N_STATE,) or input.shape != (N_INPUT,):
        raise DimensionError(
            f"ball-and-plate expects an {N_STATE}-state and {N_INPUT}-input, "
            f"got {state.shape} and {input.shape}"
        )


def ball_plate_derivative(state, input, params: BallPlateParams = BallPlateParams()) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    input = np.asarray(input, dtype=float)
    _check_sizes(state, input)

    p1, dp1, th1, dth1, p2, dp2, th2, dth2 = state
    k = params.coupling
    ddp1 = k * (p1 * dth1 ** 2 + p2 * dth1 * dth2 + params.g * np.sin(th1))
    ddp2 = k * (p2 * dth2 ** 2 + p1 * dth1 * dth2 + params.g * np.sin(th2))
    return np.array([dp1, ddp1, dth1, input[0], dp2, ddp2, dth2, input[1]])


def continuous_linearization(params: BallPlateParams = BallPlateParams()) -> Tuple[np.ndarray, np.ndarray]:
    """Jacobians of ball_plate_derivative at (x, u) = (0, 0)."""
    axis_A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, params.coupling * params.g, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    axis_B = np.array([[0.0], [0.0], [0.0], [1.0]])
    zeros_A = np.zeros((4, 4))
    zeros_B = np.zeros((4, 1))
    A_c = np.block([[axis_A, zeros_A], [zeros_A, axis_A]])
    B_c = np.block([[axis_B, zeros_B], [zeros_B, axis_B]])
    return A_c, B_c


def zoh_discretize(A_c: np.ndarray, B_c: np.ndarray, sample_time: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization through the augmented matrix exponential."""
    n_x, n_u = B_c.shape
    M = np.zeros((n_x + n_u, n_x + n_u))
    M[:n_x, :n_x] = A_c
    M[:n_x, n_x:] = B_c
    Md = expm(M * sample_time)
    return Md[:n_x, :n_x], Md[:n_x, n_x:]


def constraint_rows() -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    E = np.zeros((8, N_STATE))
    F = np.zeros((8, N_INPUT))
    for axis in range(2):
        offset = 4 * axis
        E[offset + 0, offset + 0] = 1.0  # p_i
        E[offset + 1, offset + 1] = 1.0  # dp_i
        E[offset + 2, offset + 2] = 1.0  # th_i
        F[offset + 3, axis] = 1.0        # ddth_i
    axis_hi = [POSITION_BOUND, VELOCITY_BOUND, ANGLE_BOUND, INPUT_BOUND]
    y_hi = np.array(axis_hi + axis_hi)
    return E, F, -y_hi, y_hi


def linearize_discretize(params: BallPlateParams = BallPlateParams()) -> LtiModel:
    A_c, B_c = continuous_linearization(params)
    A, B = zoh_discretize(A_c, B_c, params.sample_time)
    E, F, y_lo, y_hi = constraint_rows()
    return LtiModel.create(A, B, E, F, y_lo, y_hi)


def plant_step(
    state,
    input,
    params: BallPlateParams = BallPlateParams(),
    substeps: int = DEFAULT_SUBSTEPS,
) -> np.ndarray:
    """Fixed-step RK4 over one sample interval with the input held constant."""
    x = np.asarray(state, dtype=float).copy()
    u = np.asarray(input, dtype=float)
    _check_sizes(x, u)
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")

    h = params.sample_time / substeps
    for _ in range(substeps):
        k1 = ball_plate_derivative(x, u, params)
        k2 = ball_plate_derivative(x + 0.5 * h * k1, u, params)
        k3 = ball_plate_derivative(x + 0.5 * h * k2, u, params)
        k4 = ball_plate_derivative(x + h * k3, u, params)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def steady_reference(p1: float, p2: float) -> np.ndarray:
    """Resting ball at (p1, p2) on a level plate; every steady state has this shape."""
    x = np.zeros(N_STATE)
    x[POSITION_INDICES[0]] = p1
    x[POSITION_INDICES[1]] = p2
    return x
