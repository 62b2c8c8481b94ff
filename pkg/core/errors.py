"""
Exception hierarchy for trackmpc.

Value-style problems (bad dimensions, malformed models, mismatched schedules)
also subclass ValueError so callers that already catch ValueError for
configuration problems keep working.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from core.lti import ValidationReport


class TrackMpcError(Exception):
    """Base class for every error raised by trackmpc."""


class DimensionError(TrackMpcError, ValueError):
    """A vector or matrix does not have the size the operation expects."""


class ModelValidationError(TrackMpcError, ValueError):
    """The LTI model violates one of its structural assumptions."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("Invalid LTI model: " + "; ".join(report.problems))


class UncontrollableModelError(TrackMpcError, ValueError):
    """(A, B) is not controllable."""


class FrequencyMismatchError(TrackMpcError, ValueError):
    """Harmonic state and input parameters carry different base frequencies."""


class InfeasibleReferenceError(TrackMpcError):
    """The sigma-tightened admissible set is empty, or the oracle proved infeasibility."""


class SolverFailure(TrackMpcError):
    """A solver result cannot be used the way it was asked for."""


class IncompatibleScheduleError(TrackMpcError, ValueError):
    """Controller kind and reference schedule payloads do not match."""


class UnknownSuiteError(TrackMpcError, KeyError):
    """Requested property suite does not exist."""

    def __init__(self, name: str, available: list[str]):
        self.name = name
        self.available = available
        super().__init__(f"Unknown suite '{name}'. Available suites: {', '.join(available)}")

    def __str__(self) -> str:
        return self.args[0]
