"""Mobile-manipulator trajectory optimization by ADMM over multi-affine blocks."""

from .admm import SolveResult, SolverAbort, SolverConfig, solve
from .bench import SolveReport, cyclicity_report, robustness_study, run
from .kinematics import KinematicChain, forward_kinematics, load_chain
from .scenario import Scenario, ScenarioError, bundled_scenario, generate_path, load_scenario

__version__ = "0.1.0"

__all__ = [
    "KinematicChain", "Scenario", "ScenarioError", "SolveReport", "SolveResult", "SolverAbort",
    "SolverConfig", "bundled_scenario", "cyclicity_report", "forward_kinematics", "generate_path",
    "load_chain", "load_scenario", "robustness_study", "run", "solve",
]
