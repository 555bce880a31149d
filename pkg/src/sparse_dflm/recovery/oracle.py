from __future__ import annotations

import itertools
import math

import numpy as np

from ..sensing import DEFAULT_ENUMERATION_CAP, EnumerationCapExceeded
from .problem import RecoveryProblem, RecoveryResult, SolverOptions, Status


def brute_force_oracle(prob: RecoveryProblem, s_max: int, opts: SolverOptions | None = None,
                       cap: int = DEFAULT_ENUMERATION_CAP) -> RecoveryResult:
    """Search every support of size <= ``s_max`` for the least-l1 feasible point.

    On each support the minimum-residual least-squares solution is computed;
    a support is feasible when that residual is within ``xi`` (or within the
    feasibility tolerance when ``xi = 0``).  ``iterations`` counts supports.
    """
    opts = opts or SolverOptions()
    A, b, xi = prob.A, prob.b, prob.xi
    n = A.shape[1]
    s_max = min(int(s_max), n)
    total = sum(math.comb(n, s) for s in range(s_max + 1))
    if total > cap:
        raise EnumerationCapExceeded(f"instance too large for brute force: {total} supports > cap {cap}")
    radius = xi + opts.feasibility_tol * (1.0 + np.linalg.norm(b)) if xi == 0 else xi * (1.0 + opts.feasibility_tol)

    best_g, best_l1 = None, np.inf
    fallback_g, fallback_res = np.zeros(n), np.linalg.norm(b)
    if fallback_res <= radius:
        best_g, best_l1 = np.zeros(n), 0.0
    visited = 1
    for s in range(1, s_max + 1):
        for support in itertools.combinations(range(n), s):
            visited += 1
            cols = list(support)
            sol, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            res = np.linalg.norm(A[:, cols] @ sol - b)
            if res <= radius:
                l1 = np.abs(sol).sum()
                if l1 < best_l1:
                    best_l1 = l1
                    best_g = np.zeros(n)
                    best_g[cols] = sol
            elif best_g is None and res < fallback_res:
                fallback_res = res
                fallback_g = np.zeros(n)
                fallback_g[cols] = sol
    if best_g is None:
        return RecoveryResult.from_point(A, b, fallback_g, Status.INFEASIBLE, visited)
    return RecoveryResult.from_point(A, b, best_g, Status.OPTIMAL, visited)
