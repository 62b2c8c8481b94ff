"""
Models package for document type definitions.

This package contains Pydantic models for the files trackmpc reads and writes:
- Scenario documents (in scenario_types.py)
- CLI reports: reachable references, simulation summaries, property suites (in report_types.py)
"""

from models.scenario_types import (
    BallPlateOverrides,
    ControllerSection,
    DiagWeight,
    InlineModel,
    MetricsSection,
    ModelSource,
    PairSpec,
    ScaledInputWeight,
    ScaledStateWeight,
    ScenarioConfig,
    SegmentSpec,
    SolverOverrides,
    SuiteSection,
    WeightsSection,
)

from models.report_types import (
    AuditReport,
    HarmonicReport,
    MetricsReport,
    PairReport,
    PropertyResult,
    ReachableReport,
    ReachableSummary,
    SimulationSummary,
    SuiteReport,
)

__all__ = [
    # Scenario documents
    "BallPlateOverrides",
    "ControllerSection",
    "DiagWeight",
    "InlineModel",
    "MetricsSection",
    "ModelSource",
    "PairSpec",
    "ScaledInputWeight",
    "ScaledStateWeight",
    "ScenarioConfig",
    "SegmentSpec",
    "SolverOverrides",
    "SuiteSection",
    "WeightsSection",
    # Reports
    "AuditReport",
    "HarmonicReport",
    "MetricsReport",
    "PairReport",
    "PropertyResult",
    "ReachableReport",
    "ReachableSummary",
    "SimulationSummary",
    "SuiteReport",
]
