"""
Scenario document models

A scenario file is YAML validated against ScenarioConfig. Every section
forbids unknown keys so a typo fails loudly with the offending path.
Matrices are row-major nested lists.
"""

from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BallPlateOverrides(StrictModel):
    """Physical parameters of the builtin ball-and-plate model; unset keys keep their defaults."""
    m: Optional[float] = Field(default=None, gt=0)
    r: Optional[float] = Field(default=None, gt=0)
    I_b: Optional[float] = Field(default=None, gt=0)
    g: Optional[float] = Field(default=None, gt=0)
    sample_time: Optional[float] = Field(default=None, gt=0)


class InlineModel(StrictModel):
    A: List[List[float]]
    B: List[List[float]]
    E: List[List[float]]
    F: List[List[float]]
    y_lo: List[float]
    y_hi: List[float]


class ModelSource(StrictModel):
    builtin: Optional[Literal["ball_plate"]] = None
    ball_plate: Optional[BallPlateOverrides] = None
    inline: Optional[InlineModel] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.inline is None):
            raise ValueError("model needs exactly one of 'builtin' or 'inline'")
        if self.ball_plate is not None and self.builtin != "ball_plate":
            raise ValueError("'ball_plate' overrides only apply to builtin: ball_plate")
        return self


class ControllerSection(StrictModel):
    kind: Literal["equality", "mpct", "periodic", "hmpc"]
    horizon: int = Field(ge=1)
    sigma: float = Field(default=1e-4, ge=0)
    period: Optional[int] = Field(default=None, ge=2)
    frequency: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _kind_parameters(self):
        if self.kind == "periodic" and self.period is None:
            raise ValueError("controller.period is required for kind 'periodic'")
        if self.kind == "hmpc" and self.frequency is None:
            raise ValueError("controller.frequency is required for kind 'hmpc'")
        return self


class DiagWeight(StrictModel):
    diag: List[float]


class ScaledStateWeight(StrictModel):
    """k * Q"""
    scale_q: float = Field(gt=0)


class ScaledInputWeight(StrictModel):
    """k * R"""
    scale_r: float = Field(gt=0)


WeightSpec = Union[List[List[float]], DiagWeight, ScaledStateWeight, ScaledInputWeight]
BaseWeightSpec = Union[List[List[float]], DiagWeight]


class WeightsSection(StrictModel):
    Q: BaseWeightSpec
    R: BaseWeightSpec
    T: Optional[WeightSpec] = None
    S: Optional[WeightSpec] = None
    T_e: Optional[WeightSpec] = None
    S_e: Optional[WeightSpec] = None
    T_h: Optional[WeightSpec] = None
    S_h: Optional[WeightSpec] = None


class PairSpec(StrictModel):
    x: List[float]
    u: Optional[List[float]] = None  # zeros when omitted


class SegmentSpec(StrictModel):
    start: int = Field(ge=0)
    steady: Optional[PairSpec] = None
    periodic: Optional[List[PairSpec]] = Field(default=None, min_length=2)

    @model_validator(mode="after")
    def _one_payload(self):
        if (self.steady is None) == (self.periodic is None):
            raise ValueError("schedule segment needs exactly one of 'steady' or 'periodic'")
        return self


class SolverOverrides(StrictModel):
    rho: Optional[float] = Field(default=None, gt=0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    eps_abs: Optional[float] = Field(default=None, gt=0)
    eps_rel: Optional[float] = Field(default=None, gt=0)
    polish: Optional[bool] = None
    scaling: Optional[int] = Field(default=None, ge=0)
    adaptive_rho: Optional[bool] = None


class SuiteSection(StrictModel):
    name: str
    runs: Optional[int] = Field(default=None, ge=1)
    steps: Optional[int] = Field(default=None, ge=1)
    switch_every: Optional[int] = Field(default=None, ge=1)
    samples: Optional[int] = Field(default=None, ge=1)


class MetricsSection(StrictModel):
    threshold: float = Field(default=0.01, gt=0)
    position_indices: Optional[List[int]] = None
    velocity_indices: Optional[List[int]] = None


class ScenarioConfig(StrictModel):
    name: str
    description: Optional[str] = None
    model: ModelSource
    controller: ControllerSection
    weights: WeightsSection
    schedule: Optional[List[SegmentSpec]] = Field(default=None, min_length=1)
    x0: Optional[List[float]] = None  # zeros when omitted
    steps: int = Field(default=100, ge=1)
    plant: Literal["linear", "ball_plate"] = "linear"
    solver: Optional[SolverOverrides] = None
    suite: Optional[SuiteSection] = None
    output: Optional[str] = None
    seed: Optional[int] = None
    metrics: MetricsSection = Field(default_factory=MetricsSection)

    @model_validator(mode="after")
    def _plant_matches_model(self):
        if self.plant == "ball_plate" and self.model.builtin != "ball_plate":
            raise ValueError("plant 'ball_plate' needs model.builtin: ball_plate")
        return self
