import numpy as np
import pytest

from core.errors import InfeasibleReferenceError
from core.formulations import ControllerKind, FormulationConfig, WeightSet
from core.lti import LtiModel, SteadyStatePair
from core.reachable import (
    optimal_reachable_for,
    optimal_reachable_harmonic,
    optimal_reachable_periodic,
    optimal_reachable_steady,
    reachable_distance,
)

SIGMA = 1e-4


def double_integrator() -> LtiModel:
    return LtiModel.create(
        [[1.0, 1.0], [0.0, 1.0]],
        [[0.5], [1.0]],
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        [[0.0], [0.0], [1.0]],
        [-5.0, -2.0, -1.0],
        [5.0, 2.0, 1.0],
    )


def weights() -> WeightSet:
    return WeightSet(Q=[1.0, 0.1], R=[0.1], T=[10.0, 1.0], S=[1.0], T_h=[10.0, 1.0], S_h=[1.0])


def rest(p: float) -> SteadyStatePair:
    return SteadyStatePair([p, 0.0], [0.0])


# ── Steady ────────────────────────────────────────────────────────────────────

def test_admissible_reference_is_its_own_optimum():
    result = optimal_reachable_steady(double_integrator(), weights(), SIGMA, rest(2.0))
    np.testing.assert_allclose(result.reference.x, [2.0, 0.0], atol=1e-8)
    assert result.objective_value == pytest.approx(0.0, abs=1e-10)
    assert result.admissibility_audit().admissible


def test_unreachable_reference_is_clipped_to_tightened_band():
    result = optimal_reachable_steady(double_integrator(), weights(), SIGMA, rest(10.0))
    assert result.reference.x[0] == pytest.approx(5.0 - SIGMA, abs=1e-6)
    assert result.reference.x[0] <= 5.0 - SIGMA
    audit = result.admissibility_audit()
    assert audit.admissible
    assert audit.min_band_margin >= 0.0


def test_sigma_that_empties_band_is_infeasible():
    with pytest.raises(InfeasibleReferenceError, match="no admissible output"):
        optimal_reachable_steady(double_integrator(), weights(), 1.0, rest(0.0))


def test_negative_sigma_is_rejected():
    with pytest.raises(ValueError, match="sigma"):
        optimal_reachable_steady(double_integrator(), weights(), -1e-3, rest(0.0))


# ── Periodic ──────────────────────────────────────────────────────────────────

def test_periodic_optimum_is_an_admissible_orbit():
    window = tuple(rest(p) for p in (0.0, 1.0, 0.0, -1.0))
    result = optimal_reachable_periodic(double_integrator(), weights(), SIGMA, window)
    assert result.kind == "periodic"
    assert len(result.reference) == 4
    audit = result.admissibility_audit()
    assert audit.admissible, audit.problems


def test_constant_window_gives_constant_orbit():
    window = (rest(1.5),) * 3
    result = optimal_reachable_periodic(double_integrator(), weights(), SIGMA, window)
    for pair in result.reference:
        np.testing.assert_allclose(pair.x, [1.5, 0.0], atol=1e-7)


def test_periodic_window_needs_two_pairs():
    with pytest.raises(ValueError, match="T_p"):
        optimal_reachable_periodic(double_integrator(), weights(), SIGMA, (rest(0.0),))


# ── Harmonic ──────────────────────────────────────────────────────────────────

def test_harmonic_optimum_has_no_oscillation_and_matches_steady_center():
    model = double_integrator()
    harmonic = optimal_reachable_harmonic(model, weights(), SIGMA, rest(10.0), 0.4)
    steady = optimal_reachable_steady(model, weights(), SIGMA, rest(10.0))
    x_h, u_h = harmonic.reference
    for v in (x_h.v_s, x_h.v_c, u_h.v_s, u_h.v_c):
        np.testing.assert_allclose(v, 0.0, atol=1e-6)
    np.testing.assert_allclose(harmonic.center.x, steady.reference.x, atol=1e-6)
    assert harmonic.admissibility_audit().admissible


def test_harmonic_oracle_rejects_zero_frequency():
    with pytest.raises(ValueError, match="frequency"):
        optimal_reachable_harmonic(double_integrator(), weights(), SIGMA, rest(0.0), 0.0)


# ── Dispatch / distance ───────────────────────────────────────────────────────

def test_equality_target_is_the_payload():
    payload = rest(3.0)
    result = optimal_reachable_for(ControllerKind.EQUALITY, double_integrator(), weights(),
                                   FormulationConfig(N=5), payload)
    assert result.reference is payload
    assert result.solver is None


def test_degenerate_hmpc_settles_like_steady_oracle():
    result = optimal_reachable_for(ControllerKind.HMPC, double_integrator(), weights(),
                                   FormulationConfig(N=5, w=2 * np.pi), rest(10.0))
    assert result.kind == "steady"
    assert result.reference.x[0] == pytest.approx(5.0 - SIGMA, abs=1e-6)


def test_reachable_distance_indexes_periodic_orbit_by_time():
    window = tuple(rest(p) for p in (0.0, 1.0, 0.0, -1.0))
    result = optimal_reachable_periodic(double_integrator(), weights(), SIGMA, window)
    orbit = result.reference
    assert reachable_distance(result, orbit[1].x, t=1) == pytest.approx(0.0, abs=1e-12)
    assert reachable_distance(result, orbit[1].x, t=5) == pytest.approx(0.0, abs=1e-12)


# ── Offset-weight scaling ─────────────────────────────────────────────────────

def first_order() -> LtiModel:
    # x+ = 0.5 x + u: steady states satisfy x = 2 u, so T and S trade off.
    return LtiModel.create([[0.5]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]], [-1.0, -1.0], [1.0, 1.0])


def traded_weights() -> WeightSet:
    return WeightSet(Q=[1.0], R=[1.0], T=[3.0], S=[2.0], T_h=[3.0], S_h=[2.0])


def test_scaled_weights_multiply_every_offset_weight():
    scaled = traded_weights().scaled(4.0)
    np.testing.assert_allclose(scaled.T, [[12.0]])
    np.testing.assert_allclose(scaled.S_h, [[8.0]])
    np.testing.assert_allclose(scaled.Q, traded_weights().Q)
    with pytest.raises(ValueError, match="scale factor"):
        traded_weights().scaled(0.0)


def test_common_offset_scale_keeps_steady_minimizer():
    model, ref = first_order(), SteadyStatePair([0.8], [0.0])
    base = optimal_reachable_steady(model, traded_weights(), SIGMA, ref)
    scaled = optimal_reachable_steady(model, traded_weights().scaled(7.5), SIGMA, ref)
    # Interior optimum of 3 (x - 0.8)^2 + 2 (x / 2)^2.
    assert base.reference.x[0] == pytest.approx(2.4 / 3.5, abs=1e-7)
    np.testing.assert_allclose(scaled.reference.x, base.reference.x, atol=1e-7)
    np.testing.assert_allclose(scaled.reference.u, base.reference.u, atol=1e-7)
    assert scaled.objective_value == pytest.approx(7.5 * base.objective_value, rel=1e-6)


def test_common_offset_scale_keeps_periodic_and_harmonic_minimizers():
    model = first_order()
    window = tuple(SteadyStatePair([p], [0.0]) for p in (0.8, -0.9, 1.5))
    base = optimal_reachable_periodic(model, traded_weights(), SIGMA, window)
    scaled = optimal_reachable_periodic(model, traded_weights().scaled(0.2), SIGMA, window)
    for a, b in zip(base.reference, scaled.reference):
        np.testing.assert_allclose(a.x, b.x, atol=1e-7)
        np.testing.assert_allclose(a.u, b.u, atol=1e-7)

    ref = SteadyStatePair([1.5], [0.0])
    base_h = optimal_reachable_harmonic(model, traded_weights(), SIGMA, ref, 0.4)
    scaled_h = optimal_reachable_harmonic(model, traded_weights().scaled(3.0), SIGMA, ref, 0.4)
    np.testing.assert_allclose(scaled_h.center.x, base_h.center.x, atol=1e-6)
