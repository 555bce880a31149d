"""Least-evaluation counts and performance profiles.

For accuracy level ``tau`` a solver has solved problem ``p`` once its
(seed-averaged) best objective drops to ``f_star + tau * (f0 - f_star)``.
``N[s, p]`` is the first feval count at which that happens, ``inf`` if it
never does within the budget, and

    pi_s(alpha) = #{p : N[s, p] <= alpha * min_s N[s, p]} / |P|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..records import RunRecord

AVERAGED = "averaged"
PER_RUN = "per_run"
DEFAULT_TAUS = (1e-2, 1e-4, 1e-6, 1e-8)


def threshold(tau: float, f0: float, f_star: float) -> float:
    """``tau*f0 + (1-tau)*f_star``, written so that ``f0 == f_star`` gives ``f0`` exactly."""
    return f_star + tau * (f0 - f_star)


def averaged_trace(records: Sequence[RunRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean of best f on the union feval grid.

    Each trace is carried forward from its last entry at or before a grid
    point; before its first entry it takes its first value.
    """
    traces = [r.trace for r in records if r.trace]
    if not traces:
        return np.empty(0, dtype=int), np.empty(0)
    grid = np.unique(np.concatenate([[t[0] for t in tr] for tr in traces])).astype(int)
    total = np.zeros(grid.size)
    for tr in traces:
        ev = np.array([t[0] for t in tr])
        val = np.array([t[1] for t in tr], dtype=float)
        idx = np.searchsorted(ev, grid, side="right") - 1
        total += val[np.maximum(idx, 0)]
    return grid, total / len(traces)


def first_crossing(grid, values, level: float, budget: float = math.inf) -> float:
    hit = np.flatnonzero((np.asarray(values) <= level) & (np.asarray(grid) <= budget))
    return float(grid[hit[0]]) if hit.size else math.inf


def least_fevals(records: Sequence[RunRecord], tau: float, f0: float, f_star: float,
                 budget: float | None = None, aggregate: str = AVERAGED) -> float:
    """``N`` for one (solver, problem) cell; ``inf`` when the level is never reached.

    ``aggregate="averaged"`` thresholds the seed-averaged trace;
    ``"per_run"`` thresholds each run and averages the counts (``inf`` if
    any run fails).
    """
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if budget is None:
        budget = max((r.budget for r in records if r.budget), default=math.inf)
    level = threshold(tau, f0, f_star)
    if aggregate == AVERAGED:
        grid, mean = averaged_trace(records)
        return first_crossing(grid, mean, level, budget)
    if aggregate == PER_RUN:
        counts = [first_crossing(np.array([t[0] for t in r.trace]), np.array([t[1] for t in r.trace]),
                                 level, budget) for r in records]
        if not counts:
            return math.inf
        return float(np.mean(counts))
    raise ValueError(f"unknown aggregate {aggregate!r}; use {AVERAGED!r} or {PER_RUN!r}")


def _best_f(r: RunRecord) -> float:
    vals = [v for _, v in r.trace]
    return min(vals) if vals else math.inf


def feval_matrix(records: Iterable[RunRecord], tau: float, aggregate: str = AVERAGED,
                 solvers: Sequence[str] | None = None, problems: Sequence[str] | None = None):
    """Build ``N`` (solvers x problems) from a record set.

    ``f_star`` is the lowest best f any record reached on the problem and
    ``f0`` the starting value shared by its runs.  Orderings follow first
    appearance unless given.
    """
    records = list(records)
    if solvers is None:
        solvers = list(dict.fromkeys(r.solver_id for r in records))
    if problems is None:
        problems = list(dict.fromkeys(r.problem_id for r in records))
    N = np.full((len(solvers), len(problems)), math.inf)
    for j, prob in enumerate(problems):
        mine = [r for r in records if r.problem_id == prob]
        starts = [r.trace[0][1] for r in mine if r.trace]
        if not starts:
            continue
        f0 = max(starts)
        f_star = min(_best_f(r) for r in mine)
        for i, s in enumerate(solvers):
            cell = [r for r in mine if r.solver_id == s]
            if cell:
                N[i, j] = least_fevals(cell, tau, f0, f_star, aggregate=aggregate)
    return N, list(solvers), list(problems)


@dataclass
class PerformanceProfile:
    tau: float | None
    solvers: list[str]
    N: np.ndarray
    alphas: np.ndarray
    pi: np.ndarray  # (solvers, alphas)
    problems: list[str] | None = None

    def check(self) -> None:
        """Assert range, monotonicity and that someone wins every solvable problem."""
        if np.any(self.pi < 0) or np.any(self.pi > 1):
            raise AssertionError("profile value outside [0, 1]")
        if np.any(np.diff(self.pi, axis=1) < 0):
            raise AssertionError("profile not nondecreasing in alpha")
        solvable = np.isfinite(self.N.min(axis=0)).sum() if self.N.size else 0
        at_one = self.alphas == 1.0
        if at_one.any():
            total = self.pi[:, np.flatnonzero(at_one)[0]].sum() * self.N.shape[1]
            if total < solvable - 1e-9:
                raise AssertionError("a solvable problem has no solver attaining its minimum")


def default_alphas(N: np.ndarray, points_per_octave: int = 8) -> np.ndarray:
    """log2-spaced grid from 1 to the largest finite ratio (at least 2)."""
    best = N.min(axis=0)
    ok = np.isfinite(N) & np.isfinite(best)[None, :]
    top = 1.0
    if ok.any():
        ratios = N[ok] / np.broadcast_to(best, N.shape)[ok]
        top = max(1.0, math.ceil(math.log2(ratios.max()) * points_per_octave) / points_per_octave)
    return np.exp2(np.arange(0, int(round(top * points_per_octave)) + 1) / points_per_octave)


def profile(N, alphas=None, solvers: Sequence[str] | None = None, tau: float | None = None,
            problems: Sequence[str] | None = None) -> PerformanceProfile:
    """Performance profile of the feval matrix ``N`` (solvers x problems).

    A problem no solver finishes stays in the denominator and adds nothing
    to any numerator.
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if N.shape[0] < 1 or N.shape[1] < 1:
        raise ValueError("profile needs at least one solver and one problem")
    if np.any(N <= 0):
        raise ValueError("feval counts must be positive")
    alphas = default_alphas(N) if alphas is None else np.asarray(alphas, dtype=float)
    if np.any(np.diff(alphas) < 0):
        raise ValueError("alphas must be sorted")
    best = N.min(axis=0)
    solvable = np.isfinite(best)
    pi = np.zeros((N.shape[0], alphas.size))
    for a, alpha in enumerate(alphas):
        within = (N <= alpha * best[None, :]) & solvable[None, :] & np.isfinite(N)
        pi[:, a] = within.sum(axis=1) / N.shape[1]
    if solvers is None:
        solvers = [f"solver{i}" for i in range(N.shape[0])]
    out = PerformanceProfile(tau, list(solvers), N, alphas, pi, list(problems) if problems else None)
    out.check()
    return out
