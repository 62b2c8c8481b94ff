from .conic_solver import AdmmSolver, ConeProgram, SolverConfig, SolverResult, SolverStatus
from .formulations import ControllerKind, FormulationConfig, WeightSet, build_program, decode
from .lti import LtiModel, SteadyStatePair

__all__ = [
    "AdmmSolver",
    "ConeProgram",
    "ControllerKind",
    "FormulationConfig",
    "LtiModel",
    "SolverConfig",
    "SolverResult",
    "SolverStatus",
    "SteadyStatePair",
    "WeightSet",
    "build_program",
    "decode",
]
