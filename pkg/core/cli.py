"""
trackmpc command line.

    trackmpc simulate     --config <scenario> [--out DIR] [--quiet]
    trackmpc reachable    --config <scenario> [--out DIR] [--quiet]
    trackmpc check        --config <scenario> [--seed N] [--out DIR] [--quiet]
    trackmpc export-model --config <scenario> [--out DIR] [--quiet]

Exit codes: 0 ok, 1 usage or configuration error, 2 infeasibility
(simulation abort or empty admissible set), 3 property-suite failure.
"""

import argparse
import os
import sys
from typing import List, Optional

import numpy as np
import yaml

from core.ball_plate import POSITION_INDICES, VELOCITY_INDICES
from core.errors import InfeasibleReferenceError, TrackMpcError, UnknownSuiteError
from core.logger import get_logger
from core.property_suites import SuiteContext, available_suites, run_suite
from core.reachable import ReachableResult, optimal_reachable_for
from core.scenario import PreparedScenario, load_scenario, prepare
from core.simulator import convergence_metrics, run_closed_loop, write_atomic, write_trace_csv
from models.report_types import (
    AuditReport,
    HarmonicReport,
    MetricsReport,
    PairReport,
    ReachableReport,
    ReachableSummary,
    SimulationSummary,
)
from models.scenario_types import ScenarioConfig
from runtime_env import output_dir

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_SUITE_FAILED = 3


def _out_dir(args: argparse.Namespace, config: ScenarioConfig) -> str:
    return args.out or config.output or output_dir()


def _emit(args: argparse.Namespace, text: str) -> None:
    if not args.quiet:
        print(text)


def _write_text(path: str, text: str) -> None:
    write_atomic(path, lambda fh: fh.write(text))


def _metric_indices(prepared: PreparedScenario):
    metrics = prepared.config.metrics
    ball_plate = prepared.config.model.builtin == "ball_plate"
    positions = metrics.position_indices
    if positions is None and ball_plate:
        positions = POSITION_INDICES
    velocities = metrics.velocity_indices
    if velocities is None:
        velocities = VELOCITY_INDICES if ball_plate else ()
    return positions, velocities


def cmd_simulate(args: argparse.Namespace) -> int:
    prepared = prepare(load_scenario(args.config))
    config = prepared.config
    trace = run_closed_loop(
        prepared.kind,
        prepared.model,
        prepared.weights,
        prepared.formulation,
        prepared.plant,
        prepared.schedule,
        prepared.x0,
        config.steps,
        prepared.solver,
    )

    out = _out_dir(args, config)
    csv_path = os.path.join(out, f"{config.name}_trace.csv")
    write_trace_csv(trace, csv_path, prepared.model.n_x, prepared.model.n_u)

    metrics = None
    if trace.steps:
        positions, velocities = _metric_indices(prepared)
        last = trace.steps[-1].time
        target = trace.targets[prepared.schedule.segment_index(last)]
        m = convergence_metrics(trace, target, prepared.model, config.metrics.threshold, positions, velocities)
        metrics = MetricsReport(
            steps=m.steps,
            final_distance=m.final_distance,
            settling_step=m.settling_step,
            max_constraint_violation=m.max_constraint_violation,
            peak_velocity=list(m.peak_velocity),
            infeasible_solves=m.infeasible_solves,
            last_period_mean_error=m.last_period_mean_error,
        )

    summary = SimulationSummary(
        scenario=config.name,
        controller=prepared.kind.value,
        plant=config.plant,
        steps_requested=config.steps,
        aborted=trace.aborted,
        abort_reason=trace.abort_reason,
        final_state=trace.final_state.tolist(),
        trace_csv=csv_path,
        metrics=metrics,
    )
    summary_path = os.path.join(out, f"{config.name}_summary.json")
    text = summary.model_dump_json(indent=2)
    _write_text(summary_path, text + "\n")
    _emit(args, text)
    _emit(args, f"Wrote {csv_path}")
    _emit(args, f"Wrote {summary_path}")

    if trace.aborted:
        logger.warning(f"[CLI] simulate {config.name}: {trace.abort_reason}")
        return EXIT_INFEASIBLE
    return EXIT_OK


def _pair_report(pair) -> PairReport:
    return PairReport(x=pair.x.tolist(), u=pair.u.tolist())


def reachable_report(start: int, result: ReachableResult) -> ReachableReport:
    audit = result.admissibility_audit()
    report = ReachableReport(
        start=start,
        kind=result.kind,
        sigma=result.sigma,
        objective_value=result.objective_value,
        audit=AuditReport(
            admissible=audit.admissible,
            max_dynamics_residual=audit.max_dynamics_residual,
            min_band_margin=audit.min_band_margin,
            problems=audit.problems,
        ),
    )
    if result.kind == "steady":
        report.steady = _pair_report(result.reference)
    elif result.kind == "periodic":
        report.periodic = [_pair_report(p) for p in result.reference]
    else:
        x_h, u_h = result.reference
        report.harmonic = HarmonicReport(
            w=x_h.w,
            x_e=x_h.v_e.tolist(), x_s=x_h.v_s.tolist(), x_c=x_h.v_c.tolist(),
            u_e=u_h.v_e.tolist(), u_s=u_h.v_s.tolist(), u_c=u_h.v_c.tolist(),
            sine_cosine_norm=max(float(np.linalg.norm(v)) for v in (x_h.v_s, x_h.v_c, u_h.v_s, u_h.v_c)),
        )
    return report


def cmd_reachable(args: argparse.Namespace) -> int:
    prepared = prepare(load_scenario(args.config))
    config = prepared.config
    references = []
    try:
        for segment in prepared.schedule.segments:
            result = optimal_reachable_for(
                prepared.kind, prepared.model, prepared.weights, prepared.formulation, segment.payload
            )
            references.append(reachable_report(segment.start, result))
    except InfeasibleReferenceError as exc:
        logger.warning(f"[CLI] reachable {config.name}: {exc}")
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    summary = ReachableSummary(scenario=config.name, controller=prepared.kind.value, references=references)
    path = os.path.join(_out_dir(args, config), f"{config.name}_reachable.json")
    text = summary.model_dump_json(indent=2)
    _write_text(path, text + "\n")
    _emit(args, text)
    _emit(args, f"Wrote {path}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    config = load_scenario(args.config)
    if config.suite is None:
        raise ValueError(f"scenario '{config.name}' names no suite; available: {', '.join(available_suites())}")
    prepared = prepare(config, require_schedule=False)
    seed = args.seed if args.seed is not None else (config.seed if config.seed is not None else 0)
    ctx = SuiteContext(
        model=prepared.model,
        weights=prepared.weights,
        formulation=prepared.formulation,
        solver=prepared.solver,
        seed=seed,
        runs=config.suite.runs,
        steps=config.suite.steps,
        switch_every=config.suite.switch_every,
        samples=config.suite.samples,
    )
    report = run_suite(config.suite.name, ctx)

    path = os.path.join(_out_dir(args, config), f"{config.name}_check.json")
    text = report.model_dump_json(indent=2)
    _write_text(path, text + "\n")
    _emit(args, text)
    _emit(args, f"Wrote {path}")
    return EXIT_OK if report.passed else EXIT_SUITE_FAILED


def cmd_export_model(args: argparse.Namespace) -> int:
    prepared = prepare(load_scenario(args.config), require_schedule=False)
    config = prepared.config
    document = yaml.safe_dump(prepared.model.to_document(), sort_keys=False)
    path = os.path.join(_out_dir(args, config), f"{config.name}_model.yaml")
    _write_text(path, document)
    _emit(args, f"Wrote {path}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "reachable": cmd_reachable,
    "check": cmd_check,
    "export-model": cmd_export_model,
}


def build_argument_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        required=True,
        help="Scenario file, or a scenario name resolved against TRACKMPC_SCENARIO_DIR.",
    )
    common.add_argument(
        "--out",
        default="",
        help="Output directory (default: the scenario's output, then TRACKMPC_OUTPUT_DIR).",
    )
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized property suites.")
    common.add_argument("--quiet", action="store_true", help="Do not echo reports to stdout.")

    parser = argparse.ArgumentParser(prog="trackmpc", description="Tracking MPC simulations, oracles and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Run the closed loop and write the trace CSV and summary.")
    sub.add_parser("reachable", parents=[common], help="Report the optimal reachable reference per segment.")
    sub.add_parser("check", parents=[common], help="Run the property suite named by the scenario.")
    sub.add_parser("export-model", parents=[common], help="Write the prediction model as YAML matrices.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_argument_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except UnknownSuiteError as exc:
        logger.error(f"[CLI] {args.command}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError, yaml.YAMLError, TrackMpcError) as exc:
        logger.error(f"[CLI] {args.command}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
