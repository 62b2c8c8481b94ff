import csv
import time

import numpy as np
import pytest

from core.ball_plate import POSITION_BOUND, VELOCITY_BOUND
from core.conic_solver import SolverConfig, SolverStatus
from core.errors import IncompatibleScheduleError
from core.formulations import ControllerKind, FormulationConfig, WeightSet
from core.lti import LtiModel, SteadyStatePair
from core.scenario import load_scenario, prepare
from core.simulator import (
    LinearPlant,
    ReferenceSchedule,
    ScheduleSegment,
    convergence_metrics,
    initial_state_violation,
    run_closed_loop,
    TrackingController,
    trace_columns,
    write_atomic,
    write_trace_csv,
)


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
    return WeightSet(Q=[1.0, 0.1], R=[0.1], T=[10.0, 1.0], S=[1.0])


def rest(p: float) -> SteadyStatePair:
    return SteadyStatePair([p, 0.0], [0.0])


def simulate(kind, cfg, schedule, x0=(0.0, 0.0), steps=40):
    model = double_integrator()
    return run_closed_loop(kind, model, weights(), cfg, LinearPlant(model), schedule, np.array(x0), steps)


# ── Schedules ─────────────────────────────────────────────────────────────────

def test_schedule_must_start_at_zero_and_increase():
    with pytest.raises(ValueError, match="start at 0"):
        ReferenceSchedule((ScheduleSegment(3, rest(0.0)),))
    with pytest.raises(ValueError, match="strictly increasing"):
        ReferenceSchedule((ScheduleSegment(0, rest(0.0)), ScheduleSegment(0, rest(1.0))))


def test_schedule_rejects_mixed_payloads():
    with pytest.raises(IncompatibleScheduleError, match="mixes"):
        ReferenceSchedule((ScheduleSegment(0, rest(0.0)), ScheduleSegment(5, (rest(0.0), rest(1.0)))))


def test_periodic_payload_is_indexed_by_absolute_time():
    schedule = ReferenceSchedule.constant((rest(0.0), rest(1.0), rest(2.0)))
    assert schedule.reference_at(4).x[0] == 1.0
    window = schedule.window_at(2)
    assert [p.x[0] for p in window] == [2.0, 0.0, 1.0]


def test_segment_lookup():
    schedule = ReferenceSchedule((ScheduleSegment(0, rest(0.0)), ScheduleSegment(10, rest(1.0))))
    assert schedule.segment_index(9) == 0
    assert schedule.segment_index(10) == 1
    assert schedule.reference_at(25).x[0] == 1.0


# ── Closed loop on the linear plant ───────────────────────────────────────────

def test_mpct_converges_to_admissible_reference():
    trace = simulate(ControllerKind.MPCT, FormulationConfig(N=5), ReferenceSchedule.constant(rest(2.0)), steps=80)
    assert not trace.aborted
    assert len(trace) == 80
    np.testing.assert_allclose(trace.final_state, [2.0, 0.0], atol=1e-2)
    metrics = convergence_metrics(trace, trace.targets[0], double_integrator(), 0.01, (0,), (1,))
    assert metrics.settling_step is not None
    assert metrics.max_constraint_violation <= 1e-4
    assert metrics.infeasible_solves == 0


def test_mpct_settles_on_reachable_target_for_unreachable_reference():
    trace = simulate(ControllerKind.MPCT, FormulationConfig(N=5), ReferenceSchedule.constant(rest(9.0)), steps=80)
    target = trace.targets[0]
    assert target.reference.x[0] < 5.0
    assert trace.final_state[0] == pytest.approx(target.reference.x[0], abs=1e-2)


def test_equality_mpc_aborts_when_reference_is_out_of_reach():
    trace = simulate(ControllerKind.EQUALITY, FormulationConfig(N=1), ReferenceSchedule.constant(rest(4.0)))
    assert trace.aborted
    assert "infeasible" in trace.abort_reason
    assert trace.infeasible_count >= 1


def test_periodic_controller_refuses_steady_schedule():
    with pytest.raises(IncompatibleScheduleError):
        simulate(ControllerKind.PERIODIC, FormulationConfig(N=5, T_p=3), ReferenceSchedule.constant(rest(1.0)))


def test_periodic_schedule_period_must_match_controller():
    schedule = ReferenceSchedule.constant((rest(0.0), rest(1.0)))
    with pytest.raises(IncompatibleScheduleError, match="T_p=3"):
        simulate(ControllerKind.PERIODIC, FormulationConfig(N=5, T_p=3), schedule)


def test_periodic_tracking_reports_last_period_error():
    schedule = ReferenceSchedule.constant((rest(0.0), rest(0.5), rest(0.0), rest(-0.5)))
    trace = simulate(ControllerKind.PERIODIC, FormulationConfig(N=6, T_p=4), schedule, steps=80)
    assert not trace.aborted
    metrics = convergence_metrics(trace, trace.targets[0], double_integrator(), 0.01, (0,), (1,))
    assert metrics.last_period_mean_error is not None
    assert metrics.last_period_mean_error < 2e-2


def test_initial_state_outside_band_is_rejected():
    assert initial_state_violation(double_integrator(), np.array([6.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="initial state"):
        simulate(ControllerKind.MPCT, FormulationConfig(N=5), ReferenceSchedule.constant(rest(0.0)), x0=(6.0, 0.0))


def test_steps_must_be_positive():
    with pytest.raises(ValueError, match="steps"):
        simulate(ControllerKind.MPCT, FormulationConfig(N=5), ReferenceSchedule.constant(rest(0.0)), steps=0)


# ── Inexact solves ────────────────────────────────────────────────────────────

def test_inexact_solve_falls_back_to_shifted_plan():
    controller = TrackingController(
        ControllerKind.MPCT, double_integrator(), weights(), FormulationConfig(N=5),
        SolverConfig(max_iter=1, polish=False),
    )
    first, status, iterations = controller.solve(np.zeros(2), rest(2.0))
    # No previous plan: the retried inexact iterate is applied.
    assert status == SolverStatus.MAX_ITER_REACHED
    assert iterations == 1 + 1 * 4
    assert first.status == SolverStatus.MAX_ITER_REACHED

    second, status, _ = controller.solve(np.array([0.1, 0.0]), rest(2.0))
    assert status == SolverStatus.MAX_ITER_REACHED
    np.testing.assert_array_equal(second.predicted_inputs[:-1], first.predicted_inputs[1:])
    np.testing.assert_array_equal(second.artificial_ref.x, first.artificial_ref.x)


def test_exact_solves_report_solved_status():
    controller = TrackingController(ControllerKind.MPCT, double_integrator(), weights(), FormulationConfig(N=5))
    decoded, status, iterations = controller.solve(np.zeros(2), rest(2.0))
    assert status == SolverStatus.SOLVED
    assert decoded.status == SolverStatus.SOLVED
    assert iterations >= 1


# ── Trace output ──────────────────────────────────────────────────────────────

def test_trace_csv_has_header_and_one_row_per_step(tmp_path):
    trace = simulate(ControllerKind.MPCT, FormulationConfig(N=5), ReferenceSchedule.constant(rest(1.0)), steps=5)
    path = tmp_path / "nested" / "trace.csv"
    write_trace_csv(trace, str(path), 2, 1)
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == trace_columns(2, 1)
    assert len(rows) == 6
    assert rows[1][0] == "0"
    assert rows[1][rows[0].index("solver_status")] == SolverStatus.SOLVED.value
    assert float(rows[1][rows[0].index("x0")]) == 0.0


def test_write_atomic_leaves_nothing_behind_on_failure(tmp_path):
    path = tmp_path / "out.txt"

    def broken(fh):
        fh.write("partial")
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        write_atomic(str(path), broken)
    assert list(tmp_path.iterdir()) == []


# ── Ball-and-plate reproductions ──────────────────────────────────────────────

def run_scenario(name: str):
    prepared = prepare(load_scenario(name))
    started = time.perf_counter()
    trace = run_closed_loop(
        prepared.kind, prepared.model, prepared.weights, prepared.formulation, prepared.plant,
        prepared.schedule, prepared.x0, prepared.config.steps, prepared.solver,
    )
    return prepared, trace, time.perf_counter() - started


@pytest.mark.slow
def test_mpct_ball_plate_reaches_admissible_reference():
    prepared, trace, elapsed = run_scenario("mpct_ball_plate_admissible")
    assert not trace.aborted
    assert len(trace) == 300
    metrics = convergence_metrics(trace, trace.targets[0], prepared.model)
    assert metrics.infeasible_solves == 0
    assert metrics.settling_step is not None
    assert metrics.max_constraint_violation <= 1e-3
    assert np.max(np.abs(trace.final_state[[0, 4]] - trace.targets[0].reference.x[[0, 4]])) < 0.01
    assert elapsed < 30.0


@pytest.mark.slow
def test_mpct_ball_plate_settles_on_clipped_reference():
    prepared, trace, elapsed = run_scenario("mpct_ball_plate_nonadmissible")
    target = trace.targets[0]
    sigma = prepared.formulation.sigma
    assert target.reference.x[0] == pytest.approx(POSITION_BOUND - sigma, abs=1e-6)
    np.testing.assert_allclose(target.reference.x[[1, 5]], 0.0, atol=1e-8)
    assert not trace.aborted
    assert np.linalg.norm(trace.final_state - target.reference.x) < 1e-3
    assert elapsed < 30.0


@pytest.mark.slow
def test_harmonic_mpc_outpaces_mpct_on_short_horizon():
    mpct_prepared, mpct_trace, mpct_elapsed = run_scenario("mpct_n8_pathology")
    hmpc_prepared, hmpc_trace, hmpc_elapsed = run_scenario("hmpc_n8")
    assert mpct_prepared.config.x0 == hmpc_prepared.config.x0
    mpct = convergence_metrics(mpct_trace, mpct_trace.targets[0], mpct_prepared.model)
    hmpc = convergence_metrics(hmpc_trace, hmpc_trace.targets[0], hmpc_prepared.model)

    assert mpct.infeasible_solves == 0 and hmpc.infeasible_solves == 0
    assert mpct.peak_velocity[0] <= 0.06
    assert hmpc.peak_velocity[0] >= 0.09
    assert hmpc.peak_velocity[0] <= VELOCITY_BOUND + 5e-3
    assert mpct.settling_step is not None and hmpc.settling_step is not None
    assert hmpc.settling_step <= 0.6 * mpct.settling_step
    assert mpct_elapsed + hmpc_elapsed < 60.0


def last_period(trace, period: int):
    return trace.steps[-period:]


@pytest.mark.slow
def test_periodic_mpct_tracks_admissible_circle():
    prepared, trace, elapsed = run_scenario("permpct_admissible")
    period = prepared.formulation.T_p
    assert len(trace) >= 4 * period
    metrics = convergence_metrics(trace, trace.targets[0], prepared.model)
    assert metrics.infeasible_solves == 0
    assert metrics.last_period_mean_error < 0.01
    assert metrics.max_constraint_violation <= 1e-3
    assert elapsed < 60.0


@pytest.mark.slow
def test_periodic_mpct_converges_to_reachable_orbit():
    prepared, trace, elapsed = run_scenario("permpct_partial")
    period = prepared.formulation.T_p
    target = trace.targets[0]
    assert target.kind == "periodic"
    assert max(pair.x[0] for pair in target.reference) <= POSITION_BOUND - prepared.formulation.sigma + 1e-8
    metrics = convergence_metrics(trace, target, prepared.model)
    assert metrics.infeasible_solves == 0
    assert np.mean([s.distance for s in last_period(trace, period)]) < 1e-3
    assert metrics.max_constraint_violation <= 1e-3
    assert elapsed < 60.0
