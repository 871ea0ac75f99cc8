"""Objective-free adaptive switching method for equality-constrained problems.

Minimizes f(x) subject to c(x) = 0 using only gradients of f, alternating
AdaGrad-scaled steps in the null space of the constraint Jacobian with
damped Gauss-Newton steps that restore feasibility.
"""

from .diagnostics import IterationRecord, RunReport, TerminationStatus, audit_run
from .noise import NoiseSpec, run_study
from .problems import ProblemInstance, available, builtin, load_manifest
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "IterationRecord",
    "NoiseSpec",
    "ProblemInstance",
    "RunReport",
    "SolverConfig",
    "TerminationStatus",
    "audit_run",
    "available",
    "builtin",
    "load_manifest",
    "run_study",
    "solve",
]
