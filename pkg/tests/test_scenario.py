from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DimensionError
from core.formulations import ControllerKind
from core.scenario import (
    build_weights,
    dump_scenario,
    load_scenario,
    parse_scenario,
    prepare,
    resolve_scenario_path,
)
from core.simulator import BallPlatePlant, LinearPlant

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
SHIPPED = sorted(SCENARIO_DIR.rglob("*.yaml"))

INLINE = """
name: double_integrator
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
weights:
  Q: {diag: [1, 0.1]}
  R: [[0.1]]
  T: {scale_q: 10}
  S: {scale_r: 10}
schedule:
  - start: 0
    steady: {x: [2, 0]}
  - start: 20
    steady: {x: [-1, 0], u: [0]}
steps: 40
"""


def with_lines(text: str, old: str, new: str) -> str:
    assert old in text
    return text.replace(old, new)


# ── Shipped scenarios ─────────────────────────────────────────────────────────

def test_scenarios_are_shipped():
    assert len(SHIPPED) >= 16


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_shipped_scenario_prepares(path):
    config = load_scenario(str(path))
    prepared = prepare(config, require_schedule=config.suite is None)
    assert prepared.model.n_x == 8
    assert prepared.kind == ControllerKind(config.controller.kind)
    if config.plant == "ball_plate":
        assert isinstance(prepared.plant, BallPlatePlant)


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_shipped_scenario_survives_dump_and_parse(path):
    config = load_scenario(str(path))
    assert parse_scenario(dump_scenario(config)) == config


# ── Parsing ───────────────────────────────────────────────────────────────────

def test_inline_scenario_builds_domain_objects():
    prepared = prepare(parse_scenario(INLINE))
    assert prepared.name == "double_integrator"
    assert isinstance(prepared.plant, LinearPlant)
    np.testing.assert_allclose(prepared.weights.T, np.diag([10.0, 1.0]))
    np.testing.assert_allclose(prepared.weights.S, [[1.0]])
    assert [s.start for s in prepared.schedule.segments] == [0, 20]
    np.testing.assert_array_equal(prepared.x0, [0.0, 0.0])
    assert prepared.formulation.sigma == pytest.approx(1e-4)


def test_unknown_key_is_rejected():
    with pytest.raises(ValidationError, match="horizn"):
        parse_scenario(with_lines(INLINE, "horizon: 5", "horizon: 5\n  horizn: 6"))


def test_negative_horizon_is_rejected():
    with pytest.raises(ValidationError):
        parse_scenario(with_lines(INLINE, "horizon: 5", "horizon: -3"))


def test_periodic_controller_needs_period():
    with pytest.raises(ValidationError, match="period"):
        parse_scenario(with_lines(INLINE, "kind: mpct", "kind: periodic"))


def test_segment_needs_exactly_one_payload():
    with pytest.raises(ValidationError, match="exactly one"):
        parse_scenario(with_lines(INLINE, "  - start: 20\n", "  - start: 20\n    periodic: [{x: [0, 0]}, {x: [1, 0]}]\n"))


def test_ball_plate_plant_needs_builtin_model():
    with pytest.raises(ValidationError, match="builtin"):
        parse_scenario(with_lines(INLINE, "steps: 40", "steps: 40\nplant: ball_plate"))


def test_top_level_must_be_a_mapping():
    with pytest.raises(ValueError, match="mapping"):
        parse_scenario("- just\n- a list\n")


def test_input_scale_on_state_weight_is_rejected():
    config = parse_scenario(with_lines(INLINE, "T: {scale_q: 10}", "T: {scale_r: 10}"))
    with pytest.raises(ValueError, match="scale_r"):
        build_weights(config.weights)


def test_wrong_reference_length_is_a_dimension_error():
    config = parse_scenario(with_lines(INLINE, "steady: {x: [2, 0]}", "steady: {x: [2, 0, 0]}"))
    with pytest.raises(DimensionError, match=r"schedule\[0\]"):
        prepare(config)


def test_suite_scenario_may_omit_schedule():
    text = INLINE.split("schedule:")[0] + "suite:\n  name: soc_projection\n"
    prepared = prepare(parse_scenario(text), require_schedule=False)
    assert prepared.schedule is None
    with pytest.raises(ValueError, match="no schedule"):
        prepare(parse_scenario(text))


# ── Lookup ────────────────────────────────────────────────────────────────────

def test_bare_name_resolves_in_scenario_dir(tmp_path, monkeypatch):
    (tmp_path / "mine.yaml").write_text(INLINE, encoding="utf-8")
    monkeypatch.setattr("runtime_env._ENV_PATH", "/nonexistent/.env")
    monkeypatch.setenv("TRACKMPC_SCENARIO_DIR", str(tmp_path))
    assert resolve_scenario_path("mine") == str(tmp_path / "mine.yaml")
    assert load_scenario("mine.yaml").name == "double_integrator"


def test_missing_scenario_raises(monkeypatch, tmp_path):
    monkeypatch.setattr("runtime_env._ENV_PATH", "/nonexistent/.env")
    monkeypatch.setenv("TRACKMPC_SCENARIO_DIR", str(tmp_path))
    with pytest.raises(FileNotFoundError, match="ghost"):
        resolve_scenario_path("ghost")
