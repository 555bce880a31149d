"""l1 recovery: basis pursuit, basis pursuit denoising and a brute-force oracle."""

from .basis_pursuit import bp_solve, bp_solve_many
from .denoising import bpdn_solve
from .oracle import brute_force_oracle
from .problem import RecoveryProblem, RecoveryResult, SolverOptions, Status, dual_lower_bound


def solve(prob: RecoveryProblem, opts: SolverOptions | None = None) -> RecoveryResult:
    """Dispatch on ``prob.xi``: equality-constrained when 0, denoising otherwise."""
    if prob.xi == 0:
        return bp_solve(prob, opts)
    return bpdn_solve(prob, opts)


__all__ = [
    "RecoveryProblem",
    "RecoveryResult",
    "SolverOptions",
    "Status",
    "bp_solve",
    "bp_solve_many",
    "bpdn_solve",
    "brute_force_oracle",
    "dual_lower_bound",
    "solve",
]
