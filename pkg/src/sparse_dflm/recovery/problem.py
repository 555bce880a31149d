from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances shared by the l1 solvers.

    ``feasibility_tol`` is relative to ``1 + ||b||``; ``optimality_tol`` bounds
    the certified duality gap relative to ``1 + ||g||_1``.
    """

    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-8
    max_iter: int = 10_000
    polish: bool = True


@dataclass(frozen=True)
class RecoveryProblem:
    """``min ||g||_1`` subject to ``||A g - b|| <= xi`` (``xi = 0``: equality)."""

    A: np.ndarray
    b: np.ndarray
    xi: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.ndim != 2 or b.ndim != 1:
            raise ValueError("A must be a matrix and b a vector")
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"rows(A)={A.shape[0]} != len(b)={b.shape[0]}")
        if not self.xi >= 0:
            raise ValueError(f"noise radius must be nonnegative, got {self.xi}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "xi", float(self.xi))


@dataclass
class RecoveryResult:
    g: np.ndarray
    l1_norm: float
    residual_norm: float
    status: Status
    iterations: int = 0
    gap: float = field(default=float("nan"))

    @classmethod
    def from_point(cls, A, b, g, status, iterations=0, gap=float("nan")):
        g = np.asarray(g, dtype=float)
        return cls(g=g, l1_norm=float(np.abs(g).sum()),
                   residual_norm=float(np.linalg.norm(A @ g - b)),
                   status=Status(status), iterations=int(iterations), gap=float(gap))


def dual_lower_bound(A, b, y, xi=0.0):
    """Lower bound on the optimal l1 norm from any dual vector ``y``.

    ``y`` is rescaled into ``||A^T y||_inf <= 1`` before evaluating
    ``b^T y - xi ||y||``, so the bound is valid for arbitrary input.
    """
    y = np.asarray(y, dtype=float)
    scale = np.max(np.abs(A.T @ y), initial=0.0)
    if scale > 1.0:
        y = y / scale
    return float(b @ y - xi * np.linalg.norm(y))
