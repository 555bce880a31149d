"""Derivative-free Levenberg-Marquardt for sparse nonlinear least squares.

Jacobian rows are recovered from a few random residual differences by l1
minimisation, so each model costs ``p < n`` evaluations instead of ``n``.
"""

from .config import AdaptiveP, FixedP, SolverConfig
from .jacobian import (InterpolationSet, JacobianModel, ModelInfeasible, NonFiniteResidual,
                       assemble_jacobian, build_interpolation_set)
from .problems import Problem, get_problem, register
from .records import IterationRecord, RunRecord
from .recovery import RecoveryProblem, RecoveryResult, SolverOptions, Status, bp_solve, bpdn_solve
from .sensing import Distribution, SensingMatrix, generate, rip_constant_bruteforce
from .solver import lm_step, solve, solve_fd_baseline

__version__ = "0.1.0"

__all__ = [
    "AdaptiveP",
    "Distribution",
    "FixedP",
    "InterpolationSet",
    "IterationRecord",
    "JacobianModel",
    "ModelInfeasible",
    "NonFiniteResidual",
    "Problem",
    "RecoveryProblem",
    "RecoveryResult",
    "RunRecord",
    "SensingMatrix",
    "SolverConfig",
    "SolverOptions",
    "Status",
    "assemble_jacobian",
    "bp_solve",
    "bpdn_solve",
    "build_interpolation_set",
    "generate",
    "get_problem",
    "lm_step",
    "register",
    "rip_constant_bruteforce",
    "solve",
    "solve_fd_baseline",
]
