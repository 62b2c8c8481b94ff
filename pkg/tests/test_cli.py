import json

import pytest
import yaml

from core.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, EXIT_SUITE_FAILED, build_argument_parser, main
from core.lti import LtiModel

SCENARIO = """
name: di
model:
  inline:
    A: [[1, 1], [0, 1]]
    B: [[0.5], [1]]
    E: [[1, 0], [0, 1], [0, 0]]
    F: [[0], [0], [1]]
    y_lo: [-5, -2, -1]
    y_hi: [5, 2, 1]
controller:
  kind: mpct
  horizon: 5
  sigma: 0.0001
weights:
  Q: {diag: [1, 0.1]}
  R: {diag: [0.1]}
  T: {scale_q: 10}
  S: {scale_r: 10}
schedule:
  - start: 0
    steady: {x: [2, 0]}
  - start: 15
    steady: {x: [9, 0]}
steps: 30
"""


def write_scenario(tmp_path, text=SCENARIO, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run(tmp_path, *args, text=SCENARIO):
    out = tmp_path / "out"
    code = main([args[0], "--config", write_scenario(tmp_path, text), "--out", str(out), *args[1:]])
    return code, out


# ── Argument handling ─────────────────────────────────────────────────────────

def test_parser_knows_every_command():
    parser = build_argument_parser()
    for command in ("simulate", "reachable", "check", "export-model"):
        args = parser.parse_args([command, "--config", "x"])
        assert args.command == command
        assert args.quiet is False


def test_help_exits_ok(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "simulate" in capsys.readouterr().out


def test_missing_command_is_a_usage_error():
    assert main([]) == EXIT_CONFIG


def test_missing_scenario_file_is_a_config_error(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_invalid_horizon_is_a_config_error(tmp_path):
    code, _ = run(tmp_path, "simulate", text=SCENARIO.replace("horizon: 5", "horizon: -1"))
    assert code == EXIT_CONFIG


# ── simulate ──────────────────────────────────────────────────────────────────

def test_simulate_writes_trace_and_summary(tmp_path, capsys):
    code, out = run(tmp_path, "simulate")
    assert code == EXIT_OK
    summary = json.loads((out / "di_summary.json").read_text(encoding="utf-8"))
    assert summary["aborted"] is False
    assert summary["controller"] == "mpct"
    assert summary["metrics"]["steps"] == 30
    lines = (out / "di_trace.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 31
    assert "Wrote" in capsys.readouterr().out


def test_quiet_suppresses_stdout(tmp_path, capsys):
    code, out = run(tmp_path, "simulate", "--quiet")
    assert code == EXIT_OK
    assert capsys.readouterr().out == ""
    assert (out / "di_summary.json").exists()


def test_infeasible_equality_run_exits_two(tmp_path):
    text = SCENARIO.replace("kind: mpct", "kind: equality").replace("horizon: 5", "horizon: 1")
    code, out = run(tmp_path, "simulate", text=text)
    assert code == EXIT_INFEASIBLE
    summary = json.loads((out / "di_summary.json").read_text(encoding="utf-8"))
    assert summary["aborted"] is True


# ── reachable ─────────────────────────────────────────────────────────────────

def test_reachable_reports_each_segment(tmp_path):
    code, out = run(tmp_path, "reachable", "--quiet")
    assert code == EXIT_OK
    report = json.loads((out / "di_reachable.json").read_text(encoding="utf-8"))
    refs = report["references"]
    assert [r["start"] for r in refs] == [0, 15]
    assert refs[0]["steady"]["x"][0] == pytest.approx(2.0, abs=1e-6)
    assert refs[1]["steady"]["x"][0] < 5.0
    assert all(r["audit"]["admissible"] for r in refs)


def test_reachable_with_empty_band_exits_two(tmp_path, capsys):
    code, _ = run(tmp_path, "reachable", text=SCENARIO.replace("sigma: 0.0001", "sigma: 1.5"))
    assert code == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err


# ── check ─────────────────────────────────────────────────────────────────────

def test_check_runs_named_suite(tmp_path):
    text = SCENARIO + "suite:\n  name: soc_projection\n  samples: 50\nseed: 5\n"
    code, out = run(tmp_path, "check", "--quiet", text=text)
    assert code == EXIT_OK
    report = json.loads((out / "di_check.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["seed"] == 5


def test_check_seed_flag_overrides_scenario(tmp_path):
    text = SCENARIO + "suite:\n  name: soc_projection\n  samples: 10\nseed: 5\n"
    code, out = run(tmp_path, "check", "--quiet", "--seed", "42", text=text)
    assert code == EXIT_OK
    assert json.loads((out / "di_check.json").read_text(encoding="utf-8"))["seed"] == 42


def test_check_unknown_suite_is_a_config_error(tmp_path, capsys):
    text = SCENARIO + "suite:\n  name: not_a_suite\n"
    code, _ = run(tmp_path, "check", text=text)
    assert code == EXIT_CONFIG
    assert "Available suites" in capsys.readouterr().err


def test_check_without_suite_is_a_config_error(tmp_path):
    code, _ = run(tmp_path, "check")
    assert code == EXIT_CONFIG


def test_failed_suite_exit_code_is_distinct():
    assert len({EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SUITE_FAILED}) == 4


# ── export-model ──────────────────────────────────────────────────────────────

def test_export_model_round_trips(tmp_path):
    code, out = run(tmp_path, "export-model", "--quiet")
    assert code == EXIT_OK
    doc = yaml.safe_load((out / "di_model.yaml").read_text(encoding="utf-8"))
    model = LtiModel.from_document(doc)
    assert model.A.tolist() == [[1.0, 1.0], [0.0, 1.0]]
    assert model.y_hi.tolist() == [5.0, 2.0, 1.0]


def test_trace_csv_is_deterministic(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    path = write_scenario(tmp_path)
    assert main(["simulate", "--config", path, "--out", str(first), "--quiet"]) == EXIT_OK
    assert main(["simulate", "--config", path, "--out", str(second), "--quiet"]) == EXIT_OK
    assert (first / "di_trace.csv").read_bytes() == (second / "di_trace.csv").read_bytes()


# ── Shipped ball-and-plate scenarios ──────────────────────────────────────────

@pytest.mark.slow
def test_admissible_scenario_settles_on_reference(tmp_path):
    assert main(["simulate", "--config", "mpct_ball_plate_admissible", "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    summary = json.loads((tmp_path / "mpct_ball_plate_admissible_summary.json").read_text(encoding="utf-8"))
    final = summary["final_state"]
    assert abs(final[0] - 0.2) < 0.01
    assert abs(final[4] - 0.15) < 0.01


@pytest.mark.slow
def test_reachable_report_matches_converged_simulation(tmp_path):
    name = "mpct_ball_plate_nonadmissible"
    assert main(["reachable", "--config", name, "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    assert main(["simulate", "--config", name, "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    reachable = json.loads((tmp_path / f"{name}_reachable.json").read_text(encoding="utf-8"))
    summary = json.loads((tmp_path / f"{name}_summary.json").read_text(encoding="utf-8"))
    target = reachable["references"][0]["steady"]["x"]
    assert target[0] < 0.3
    assert abs(summary["final_state"][0] - target[0]) < 1e-3
    assert abs(summary["final_state"][4] - target[4]) < 1e-3


@pytest.mark.slow
def test_equivalence_scenario_check_passes(tmp_path):
    assert main(["check", "--config", "hmpc_w2pi_equiv", "--out", str(tmp_path), "--quiet"]) == EXIT_OK
