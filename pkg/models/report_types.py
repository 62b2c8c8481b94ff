"""
Machine-readable reports written by the CLI (JSON via model_dump_json).
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class PairReport(BaseModel):
    x: List[float]
    u: List[float]


class HarmonicReport(BaseModel):
    w: float
    x_e: List[float]
    x_s: List[float]
    x_c: List[float]
    u_e: List[float]
    u_s: List[float]
    u_c: List[float]
    sine_cosine_norm: float


class AuditReport(BaseModel):
    admissible: bool
    max_dynamics_residual: float
    min_band_margin: float
    problems: List[str] = Field(default_factory=list)


class ReachableReport(BaseModel):
    """Oracle answer for one schedule segment."""
    start: int
    kind: Literal["steady", "periodic", "harmonic"]
    sigma: float
    objective_value: float
    steady: Optional[PairReport] = None
    periodic: Optional[List[PairReport]] = None
    harmonic: Optional[HarmonicReport] = None
    audit: AuditReport


class ReachableSummary(BaseModel):
    scenario: str
    controller: str
    references: List[ReachableReport]


class MetricsReport(BaseModel):
    steps: int
    final_distance: float
    settling_step: Optional[int] = None
    max_constraint_violation: float
    peak_velocity: List[float]
    infeasible_solves: int
    last_period_mean_error: Optional[float] = None


class SimulationSummary(BaseModel):
    scenario: str
    controller: str
    plant: str
    steps_requested: int
    aborted: bool
    abort_reason: Optional[str] = None
    final_state: List[float]
    trace_csv: str
    metrics: Optional[MetricsReport] = None  # absent when the first solve was infeasible


class PropertyResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    measurements: Dict[str, float] = Field(default_factory=dict)
    counterexample: Optional[Dict[str, Any]] = None  # first failing sample, JSON-ready


class SuiteReport(BaseModel):
    suite: str
    seed: int
    passed: bool
    properties: List[PropertyResult]
