import numpy as np
import pytest
import scipy.sparse as sparse

from core.conic_solver import ConeProgram, SolverConfig, solve
from core.errors import UnknownSuiteError
from core.formulations import FormulationConfig, WeightSet
from core.lti import LtiModel
from core.property_suites import (
    MAX_KKT_BOX_ROWS,
    SUITES,
    SuiteContext,
    available_suites,
    enumerate_kkt_solution,
    get_suite,
    random_strongly_convex_qp,
    run_suite,
)
from core.scenario import load_scenario, prepare


def double_integrator() -> LtiModel:
    return LtiModel.create(
        [[1.0, 1.0], [0.0, 1.0]],
        [[0.5], [1.0]],
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        [[0.0], [0.0], [1.0]],
        [-5.0, -2.0, -1.0],
        [5.0, 2.0, 1.0],
    )


def context(**overrides) -> SuiteContext:
    options = dict(
        model=double_integrator(),
        weights=WeightSet(Q=[1.0, 0.1], R=[0.1], T=[10.0, 1.0], S=[1.0]),
        formulation=FormulationConfig(N=6, T_p=4, w=0.4),
        seed=11,
        runs=2,
        steps=12,
        switch_every=6,
        samples=5,
    )
    options.update(overrides)
    return SuiteContext(**options)


# ── Registry ──────────────────────────────────────────────────────────────────

def test_registry_lists_every_suite_sorted():
    names = available_suites()
    assert names == sorted(SUITES)
    assert len(names) == 8
    assert "soc_projection" in names


def test_unknown_suite_names_the_available_ones():
    with pytest.raises(UnknownSuiteError) as exc:
        get_suite("nope")
    assert "Available suites" in str(exc.value)
    assert "harmonic_oracle" in str(exc.value)


def test_context_options_fall_back_to_defaults():
    ctx = context(runs=None)
    assert ctx.option("runs", 50) == 50
    assert ctx.option("samples", 7) == 5


def test_context_rng_is_reproducible():
    ctx = context()
    assert ctx.rng().random() == ctx.rng().random()


# ── Active-set enumeration ────────────────────────────────────────────────────

def test_enumeration_finds_clipped_minimizer():
    # min 1/2 ||x||^2 - 2 x1 - 2 x2  s.t.  x1 <= 1,  -1 <= x2 <= 3
    x = enumerate_kkt_solution(
        np.eye(2), np.array([-2.0, -2.0]), np.zeros((0, 2)), np.zeros(0),
        np.eye(2), np.array([-10.0, -1.0]), np.array([1.0, 3.0]),
    )
    np.testing.assert_allclose(x, [1.0, 2.0])


def test_enumeration_honours_equalities():
    x = enumerate_kkt_solution(
        np.eye(2), np.zeros(2), np.array([[1.0, 1.0]]), np.array([2.0]),
        np.array([[1.0, 0.0]]), np.array([-10.0]), np.array([10.0]),
    )
    np.testing.assert_allclose(x, [1.0, 1.0])


def test_random_qp_is_strongly_convex_and_feasible():
    qp = random_strongly_convex_qp(np.random.default_rng(0))
    assert np.min(np.linalg.eigvalsh(qp["P"])) > 0
    assert np.all(qp["lo"] < qp["hi"])


def test_enumeration_handles_ten_box_rows():
    # Separable: the minimizer is the target clipped to its box.
    target = np.linspace(-2.0, 2.0, 10)
    lo, hi = np.full(10, -1.0), np.full(10, 1.0)
    x = enumerate_kkt_solution(np.eye(10), -target, np.zeros((0, 10)), np.zeros(0), np.eye(10), lo, hi)
    np.testing.assert_allclose(x, np.clip(target, lo, hi), atol=1e-9)


def test_enumeration_with_more_rows_than_variables_matches_solver():
    rng = np.random.default_rng(5)
    G = rng.standard_normal((10, 3))
    g = G @ rng.standard_normal(3)
    P, q = np.diag([2.0, 1.0, 3.0]), 4.0 * rng.standard_normal(3)
    lo, hi = g - 0.2, g + 0.2
    expected = enumerate_kkt_solution(P, q, np.zeros((0, 3)), np.zeros(0), G, lo, hi)
    prog = ConeProgram(P=sparse.csc_matrix(P), q=q, box_rows=sparse.csc_matrix(G), lo=lo, hi=hi)
    result = solve(prog, SolverConfig(eps_abs=1e-10, eps_rel=1e-10, max_iter=50000))
    assert result.solved
    np.testing.assert_allclose(result.x, expected, atol=1e-6)


def test_random_qp_box_rows_reach_ten():
    rng = np.random.default_rng(3)
    assert MAX_KKT_BOX_ROWS == 10
    assert max(random_strongly_convex_qp(rng)["G"].shape[0] for _ in range(200)) == MAX_KKT_BOX_ROWS


# ── Suites on small instances ─────────────────────────────────────────────────

def test_soc_projection_suite_passes():
    report = run_suite("soc_projection", context(samples=500))
    assert report.passed
    assert [p.name for p in report.properties] == ["idempotent", "nonexpansive"]


def test_solver_kkt_oracle_passes():
    report = run_suite("solver_kkt_oracle", context(samples=10))
    assert report.passed, report.properties[0].detail


def test_recursive_feasibility_mpct_on_double_integrator():
    report = run_suite("recursive_feasibility_mpct", context())
    assert report.passed, [p.detail for p in report.properties]
    assert report.properties[0].measurements["runs"] == 2


def test_recursive_feasibility_periodic_on_double_integrator():
    report = run_suite("recursive_feasibility_periodic", context())
    assert report.passed, [p.detail for p in report.properties]


def test_harmonic_characterization_on_double_integrator():
    report = run_suite("harmonic_reachable_characterization", context())
    assert report.passed, [p.detail for p in report.properties]


def test_harmonic_oracle_on_double_integrator():
    report = run_suite("harmonic_oracle", context(samples=10))
    assert report.passed, [p.counterexample for p in report.properties]


def test_equivalence_at_two_pi_on_double_integrator():
    report = run_suite("hmpc_mpct_equivalence_w2pi", context(samples=3))
    assert report.passed, [p.detail for p in report.properties]


def test_harmonic_suites_need_a_proper_frequency():
    with pytest.raises(ValueError, match="frequency"):
        run_suite("harmonic_oracle", context(formulation=FormulationConfig(N=6, w=2 * np.pi)))


def test_periodic_suite_needs_a_period():
    with pytest.raises(ValueError, match="period"):
        run_suite("recursive_feasibility_periodic", context(formulation=FormulationConfig(N=6)))


def test_report_carries_seed():
    assert run_suite("soc_projection", context(seed=99, samples=10)).seed == 99


# ── Shipped suite scenarios ───────────────────────────────────────────────────

@pytest.mark.slow
@pytest.mark.parametrize("name", ["harmonic_reachable_characterization", "harmonic_oracle", "solver_kkt_oracle"])
def test_shipped_check_scenarios_pass(name):
    prepared = prepare(load_scenario(f"checks/{name}"), require_schedule=False)
    suite = prepared.config.suite
    ctx = SuiteContext(
        model=prepared.model,
        weights=prepared.weights,
        formulation=prepared.formulation,
        solver=prepared.solver,
        seed=prepared.config.seed,
        samples=min(suite.samples or 20, 20),
    )
    report = run_suite(suite.name, ctx)
    assert report.passed, [p.detail for p in report.properties]
