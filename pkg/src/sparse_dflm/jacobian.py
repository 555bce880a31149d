"""Interpolation data and l1-recovered Jacobian models.

With directions ``v^1..v^p`` stacked as rows of ``A`` and scale ``sigma``,
row ``i`` of the model solves

    min ||g||_1  s.t.  ||A g - (F_i(x + sigma v^j) - F_i(x))_j / sigma|| <= xi,

with ``xi = 0`` giving the equality-constrained (noiseless) variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .recovery import RecoveryProblem, SolverOptions, Status, bp_solve_many, bpdn_solve
from .sensing import SensingMatrix, row_norm_bound


class NonFiniteResidual(FloatingPointError):
    """The residual map returned NaN or Inf."""

    def __init__(self, message, point_index=None, x=None):
        super().__init__(message)
        self.point_index = point_index
        self.x = x


class ModelInfeasible(ArithmeticError):
    """A row recovery problem had no feasible point."""


@dataclass
class InterpolationSet:
    x_k: np.ndarray
    sigma_k: float
    A: SensingMatrix
    F_base: np.ndarray
    # Row j holds F(x_k + sigma_k * A[j]).
    F_shifted: np.ndarray
    fevals_used: int

    def scaled_differences(self) -> np.ndarray:
        """``(F_shifted - F_base) / sigma_k``; column i is the data for residual i."""
        return (self.F_shifted - self.F_base[None, :]) / self.sigma_k


@dataclass
class JacobianModel:
    J: np.ndarray
    row_status: list[Status]
    sigma_k: float
    xi_k: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.J.shape


def build_interpolation_set(residual, x_k, F_base, sigma_k: float, A: SensingMatrix) -> InterpolationSet:
    """Evaluate ``residual`` once at each of the p points ``x_k + sigma_k * A[j]``."""
    if not sigma_k > 0:
        raise ValueError(f"sigma_k must be positive, got {sigma_k}")
    x_k = np.asarray(x_k, dtype=float)
    F_base = np.asarray(F_base, dtype=float)
    directions = A.entries
    if directions.shape[1] != x_k.size:
        raise ValueError(f"sensing matrix has {directions.shape[1]} columns, x has {x_k.size} entries")
    rows = []
    for j, v in enumerate(directions):
        point = x_k + sigma_k * v
        Fj = np.asarray(residual(point), dtype=float)
        if not np.all(np.isfinite(Fj)):
            raise NonFiniteResidual(f"non-finite residual at interpolation point {j}", point_index=j, x=point)
        rows.append(Fj)
    F_shifted = np.vstack(rows) if rows else np.empty((0, F_base.size))
    return InterpolationSet(x_k, float(sigma_k), A, F_base, F_shifted, len(rows))


def theoretical_xi(p: int, sigma_k: float, lipschitz: float, A: SensingMatrix) -> float:
    """Noise radius ``sqrt(p) * L * kappa_bv^2 * sigma / 2`` for gradient-Lipschitz constant ``L``.

    ``kappa_bv`` is the distribution's row-norm bound, or the observed
    maximum row norm for Gaussian directions.
    """
    bound = row_norm_bound(A.distribution, A.p, A.n)
    kappa = A.max_row_norm() if bound is None else bound
    return math.sqrt(p) * lipschitz * kappa**2 * sigma_k / 2.0


def assemble_jacobian(iset: InterpolationSet, xi: float = 0.0,
                      opts: SolverOptions | None = None) -> JacobianModel:
    """Recover every Jacobian row from the shared sensing matrix.

    ``xi = 0`` solves the equality-constrained problems (batched);
    ``xi > 0`` solves the denoising problems row by row.
    """
    opts = opts or SolverOptions()
    A = iset.A.entries
    B = iset.scaled_differences().T
    if xi == 0:
        results = bp_solve_many(A, B, opts)
    else:
        results = [bpdn_solve(RecoveryProblem(A, b, xi), opts) for b in B]
    bad = [i for i, r in enumerate(results) if r.status is Status.INFEASIBLE]
    if bad:
        raise ModelInfeasible(f"recovery infeasible for residual rows {bad[:10]}")
    J = np.vstack([r.g for r in results]) if results else np.zeros((0, A.shape[1]))
    return JacobianModel(J, [r.status for r in results], iset.sigma_k, float(xi))
