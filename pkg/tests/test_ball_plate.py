import numpy as np
import pytest

from core.ball_plate import (
    DEFAULT_SUBSTEPS,
    N_INPUT,
    N_STATE,
    BallPlateParams,
    ball_plate_derivative,
    linearize_discretize,
    plant_step,
    steady_reference,
)
from core.errors import DimensionError
from core.lti import SteadyStatePair, controllability_index, is_admissible_steady_state


def test_default_params_give_five_sevenths_coupling():
    assert BallPlateParams().coupling == pytest.approx(5.0 / 7.0)


def test_params_reject_non_positive_values():
    with pytest.raises(ValueError, match="sample_time"):
        BallPlateParams(sample_time=0.0)


def test_linearized_model_matches_known_entries():
    model = linearize_discretize()
    Ts = 0.2
    kg = 5.0 / 7.0 * 9.81
    assert model.A[0, 1] == pytest.approx(Ts)
    assert model.A[1, 2] == pytest.approx(kg * Ts)
    assert model.A[0, 2] == pytest.approx(kg * Ts ** 2 / 2)
    assert model.B[3, 0] == pytest.approx(Ts)
    assert model.B[0, 0] == pytest.approx(kg * Ts ** 4 / 24)
    # axes are decoupled
    np.testing.assert_array_equal(model.A[:4, 4:], 0.0)


def test_linearized_model_bounds_and_index():
    model = linearize_discretize()
    np.testing.assert_allclose(model.y_hi, [0.3, 0.1, np.pi / 4, 0.1] * 2)
    np.testing.assert_allclose(model.y_lo, -model.y_hi)
    assert controllability_index(model) == 4


def test_resting_ball_is_an_admissible_steady_state():
    model = linearize_discretize()
    pair = SteadyStatePair(steady_reference(0.2, -0.1), np.zeros(N_INPUT))
    assert is_admissible_steady_state(model, pair, sigma=1e-4)


def test_origin_is_an_equilibrium_of_the_plant():
    np.testing.assert_allclose(plant_step(np.zeros(N_STATE), np.zeros(N_INPUT)), 0.0)


def test_plant_agrees_with_linearization_near_origin():
    model = linearize_discretize()
    x = np.zeros(N_STATE)
    x[2] = 1e-4
    u = np.array([1e-4, -1e-4])
    np.testing.assert_allclose(plant_step(x, u), model.step(x, u), atol=1e-9)


def test_derivative_rejects_wrong_sizes():
    with pytest.raises(DimensionError):
        ball_plate_derivative(np.zeros(4), np.zeros(N_INPUT))


def test_halving_the_integration_substep_changes_little():
    x = np.array([0.1, -0.05, 0.02, 0.01, -0.2, 0.08, -0.03, 0.0])
    u = np.array([0.05, -0.08])
    coarse = plant_step(x, u)
    fine = plant_step(x, u, substeps=2 * DEFAULT_SUBSTEPS)
    assert np.max(np.abs(fine - coarse)) < 1e-9


def test_plant_step_rejects_zero_substeps():
    with pytest.raises(ValueError, match="substeps"):
        plant_step(np.zeros(N_STATE), np.zeros(N_INPUT), substeps=0)
