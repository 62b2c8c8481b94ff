import numpy as np
import pytest

from core.errors import DimensionError, FrequencyMismatchError
from core.harmonic import (
    HarmonicParams,
    constraint_margins,
    evaluate,
    harmonic_state_from_input,
    in_constraint_set,
    in_dynamics_set,
    is_admissible_harmonic,
    is_degenerate_frequency,
    sample,
    shift_harmonic,
)
from core.lti import LtiModel

W = 0.3


def stable_model() -> LtiModel:
    return LtiModel.create(
        [[0.9, 0.1], [0.0, 0.8]],
        [[0.0], [1.0]],
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        [[0.0], [0.0], [1.0]],
        [-1.0, -1.0, -1.0],
        [1.0, 1.0, 1.0],
    )


def small_harmonic(model: LtiModel, amplitude: float = 0.05):
    u_h = HarmonicParams([0.1], [amplitude], [0.0], W)
    return harmonic_state_from_input(model, u_h), u_h


# ── Signal algebra ────────────────────────────────────────────────────────────

def test_evaluate_matches_definition():
    h = HarmonicParams([1.0], [2.0], [3.0], W)
    t = 7
    assert evaluate(h, t)[0] == pytest.approx(1.0 + 2.0 * np.sin(W * t) + 3.0 * np.cos(W * t))


def test_sample_rows_equal_pointwise_evaluation():
    h = HarmonicParams([0.5, -1.0], [0.1, 0.2], [0.3, -0.4], W)
    rows = sample(h, range(5))
    for t in range(5):
        np.testing.assert_allclose(rows[t], evaluate(h, t))


def test_shift_harmonic_advances_time():
    h = HarmonicParams([0.5], [0.1], [0.3], W)
    shifted = shift_harmonic(h, 3)
    for t in range(4):
        np.testing.assert_allclose(evaluate(shifted, t), evaluate(h, t + 3), atol=1e-12)


def test_amplitude_is_sine_cosine_norm():
    h = HarmonicParams([0.0], [3.0], [4.0], W)
    assert h.amplitude[0] == pytest.approx(5.0)


def test_params_reject_mixed_lengths_and_negative_frequency():
    with pytest.raises(DimensionError):
        HarmonicParams([0.0, 1.0], [0.0], [0.0], W)
    with pytest.raises(ValueError):
        HarmonicParams([0.0], [0.0], [0.0], -1.0)


def test_degenerate_frequencies():
    assert is_degenerate_frequency(0.0)
    assert is_degenerate_frequency(2 * np.pi)
    assert not is_degenerate_frequency(0.3254)


# ── Admissible set ────────────────────────────────────────────────────────────

def test_state_from_input_lands_in_dynamics_set():
    model = stable_model()
    x_h, u_h = small_harmonic(model)
    assert in_dynamics_set(x_h, u_h, model)


def test_cone_membership_agrees_with_time_domain_oracle():
    model = stable_model()
    x_h, u_h = small_harmonic(model)
    assert in_constraint_set(x_h, u_h, model, sigma=1e-4)
    assert is_admissible_harmonic(x_h, u_h, model, sigma=1e-4)


def test_oversized_harmonic_fails_both_checks():
    model = stable_model()
    x_h, u_h = small_harmonic(model, amplitude=2.0)
    upper, lower = constraint_margins(x_h, u_h, model, sigma=0.0)
    assert min(upper.min(), lower.min()) < 0
    assert not is_admissible_harmonic(x_h, u_h, model)


def test_perturbed_state_leaves_dynamics_set():
    model = stable_model()
    x_h, u_h = small_harmonic(model)
    bumped = HarmonicParams(x_h.v_e + 1e-3, x_h.v_s, x_h.v_c, W)
    assert not in_dynamics_set(bumped, u_h, model)
    assert not is_admissible_harmonic(bumped, u_h, model)


def test_mismatched_frequencies_are_rejected():
    model = stable_model()
    x_h, _ = small_harmonic(model)
    with pytest.raises(FrequencyMismatchError):
        in_dynamics_set(x_h, HarmonicParams([0.1], [0.05], [0.0], W + 0.1), model)


def test_singular_bias_requires_explicit_bias():
    integrator = LtiModel.create(
        [[1.0, 1.0], [0.0, 1.0]], [[0.5], [1.0]], np.eye(2), [[0.0], [0.0]], [-1.0, -1.0], [1.0, 1.0]
    )
    u_h = HarmonicParams([0.0], [0.01], [0.0], W)
    with pytest.raises(ValueError, match="uniquely"):
        harmonic_state_from_input(integrator, u_h)
    x_h = harmonic_state_from_input(integrator, u_h, x_e=[0.2, 0.0])
    assert in_dynamics_set(x_h, u_h, integrator)
