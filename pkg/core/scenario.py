"""
Scenario files: YAML documents validated by models.scenario_types and
turned into the domain objects the simulator, oracles and suites consume.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from core.ball_plate import BallPlateParams, linearize_discretize
from core.conic_solver import SolverConfig
from core.errors import DimensionError
from core.formulations import ControllerKind, FormulationConfig, WeightSet
from core.logger import get_logger
from core.lti import LtiModel, SteadyStatePair
from core.simulator import BallPlatePlant, LinearPlant, Plant, ReferenceSchedule, ScheduleSegment
from models.scenario_types import (
    DiagWeight,
    PairSpec,
    ScaledInputWeight,
    ScaledStateWeight,
    ScenarioConfig,
    WeightsSection,
)
from runtime_env import scenario_dir

logger = get_logger(__name__)

_STATE_WEIGHTS = ("T", "T_e", "T_h")
_INPUT_WEIGHTS = ("S", "S_e", "S_h")


def resolve_scenario_path(ref: str) -> str:
    """
    An existing path is used as is; otherwise `ref` is looked up in the
    scenario directory, with or without the .yaml suffix.
    """
    if os.path.isfile(ref):
        return ref
    base = scenario_dir()
    for candidate in (os.path.join(base, ref), os.path.join(base, f"{ref}.yaml")):
        if os.path.isfile(candidate):
            return candidate
    raise FileNotFoundError(f"scenario '{ref}' not found (looked in {base})")


def parse_scenario(text: str) -> ScenarioConfig:
    document = yaml.safe_load(text)
    if not isinstance(document, dict):
        raise ValueError("scenario document must be a mapping at the top level")
    return ScenarioConfig.model_validate(document)


def load_scenario(ref: str) -> ScenarioConfig:
    path = resolve_scenario_path(ref)
    with open(path, "r", encoding="utf-8") as fh:
        config = parse_scenario(fh.read())
    logger.info(f"[CLI] loaded scenario '{config.name}' from {path}")
    return config


def dump_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(
        config.model_dump(mode="json", exclude_none=True),
        sort_keys=False,
        default_flow_style=None,
    )


def ball_plate_params(config: ScenarioConfig) -> BallPlateParams:
    overrides = config.model.ball_plate
    if overrides is None:
        return BallPlateParams()
    return BallPlateParams(**overrides.model_dump(exclude_none=True))


def build_model(config: ScenarioConfig) -> LtiModel:
    if config.model.builtin == "ball_plate":
        return linearize_discretize(ball_plate_params(config))
    inline = config.model.inline
    return LtiModel.create(inline.A, inline.B, inline.E, inline.F, inline.y_lo, inline.y_hi)


def _weight_matrix(spec, name: str, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    if isinstance(spec, DiagWeight):
        return np.diag(np.asarray(spec.diag, dtype=float))
    if isinstance(spec, ScaledStateWeight):
        if name in _INPUT_WEIGHTS:
            raise ValueError(f"weights.{name}: scale_q applies to state weights only")
        return spec.scale_q * Q
    if isinstance(spec, ScaledInputWeight):
        if name in _STATE_WEIGHTS:
            raise ValueError(f"weights.{name}: scale_r applies to input weights only")
        return spec.scale_r * R
    return np.asarray(spec, dtype=float)


def build_weights(section: WeightsSection) -> WeightSet:
    Q = _weight_matrix(section.Q, "Q", None, None)
    R = _weight_matrix(section.R, "R", None, None)
    offsets = {
        name: _weight_matrix(getattr(section, name), name, Q, R)
        for name in _STATE_WEIGHTS + _INPUT_WEIGHTS
        if getattr(section, name) is not None
    }
    return WeightSet(Q, R, **offsets)


def build_formulation_config(config: ScenarioConfig) -> FormulationConfig:
    c = config.controller
    return FormulationConfig(N=c.horizon, sigma=c.sigma, T_p=c.period, w=c.frequency)


def _vector(values, size: int, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (size,):
        raise DimensionError(f"{what} must have length {size}, got {v.shape[0]}")
    return v


def _pair(spec: PairSpec, model: LtiModel, what: str) -> SteadyStatePair:
    x = _vector(spec.x, model.n_x, f"{what}.x")
    u = np.zeros(model.n_u) if spec.u is None else _vector(spec.u, model.n_u, f"{what}.u")
    return SteadyStatePair(x, u)


def build_schedule(config: ScenarioConfig, model: LtiModel) -> ReferenceSchedule:
    if not config.schedule:
        raise ValueError("scenario has no schedule")
    segments = []
    for i, seg in enumerate(config.schedule):
        where = f"schedule[{i}]"
        if seg.steady is not None:
            payload = _pair(seg.steady, model, f"{where}.steady")
        else:
            payload = tuple(_pair(p, model, f"{where}.periodic[{j}]") for j, p in enumerate(seg.periodic))
        segments.append(ScheduleSegment(seg.start, payload))
    return ReferenceSchedule(tuple(segments))


def build_solver_config(config: ScenarioConfig) -> SolverConfig:
    if config.solver is None:
        return SolverConfig()
    return SolverConfig(**config.solver.model_dump(exclude_none=True))


def build_plant(config: ScenarioConfig, model: LtiModel) -> Plant:
    if config.plant == "ball_plate":
        return BallPlatePlant(ball_plate_params(config))
    return LinearPlant(model)


def initial_state(config: ScenarioConfig, model: LtiModel) -> np.ndarray:
    if config.x0 is None:
        return np.zeros(model.n_x)
    return _vector(config.x0, model.n_x, "x0")


@dataclass(frozen=True, eq=False)
class PreparedScenario:
    """Every field of a scenario resolved into domain objects."""
    config: ScenarioConfig
    kind: ControllerKind
    model: LtiModel
    weights: WeightSet
    formulation: FormulationConfig
    solver: SolverConfig
    schedule: Optional[ReferenceSchedule]
    plant: Plant
    x0: np.ndarray

    @property
    def name(self) -> str:
        return self.config.name


def prepare(config: ScenarioConfig, require_schedule: bool = True) -> PreparedScenario:
    model = build_model(config)
    schedule = build_schedule(config, model) if (require_schedule or config.schedule) else None
    return PreparedScenario(
        config=config,
        kind=ControllerKind(config.controller.kind),
        model=model,
        weights=build_weights(config.weights),
        formulation=build_formulation_config(config),
        solver=build_solver_config(config),
        schedule=schedule,
        plant=build_plant(config, model),
        x0=initial_state(config, model),
    )
