"""Sparse nonlinear least-squares test problems and a name registry.

Built-in families (``F: R^n -> R^n``, 1-based indices in the formulas):

* ``broyden``      Broyden tridiagonal, ``(3 - 2 x_i) x_i - x_{i-1} - 2 x_{i+1} + 1``
* ``valley``       tridimensional valley, blocks of three, ``n % 3 == 0``
* ``freudenstein`` extended Freudenstein and Roth, pairs, ``n`` even
* ``trig``         trigonometric system with blocks of five, ``n % 5 == 0``

Residual functions are module-level so problems pickle cleanly into worker
processes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FD_STEP = 1.5e-8

VALLEY_C1 = 1.003344481605351
VALLEY_C2 = -3.344481605351171e-3


class ProblemError(ValueError):
    """Invalid problem definition or dimension."""


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    n: int
    m: int
    residual: Callable[[np.ndarray], np.ndarray]
    initial_point: np.ndarray
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    row_sparsity: int | None = None
    thread_safe: bool = True
    family: str | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.residual(np.asarray(x, dtype=float)), dtype=float)

    def objective(self, x) -> float:
        F = self(x)
        return 0.5 * float(F @ F)


def forward_difference_jacobian(fun, x, f0=None, step: float = FD_STEP) -> np.ndarray:
    """Forward-difference Jacobian with absolute step ``step`` (n evaluations)."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x) if f0 is None else f0, dtype=float)
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy()
        xp[j] += step
        J[:, j] = (np.asarray(fun(xp), dtype=float) - f0) / step
    return J


# -- Broyden tridiagonal ----------------------------------------------------

def _broyden_residual(x):
    xp = np.concatenate(([0.0], x, [0.0]))
    return (3.0 - 2.0 * x) * x - xp[:-2] - 2.0 * xp[2:] + 1.0


def _broyden_jacobian(x):
    n = x.size
    J = np.diag(3.0 - 4.0 * x)
    J[np.arange(1, n), np.arange(n - 1)] = -1.0
    J[np.arange(n - 1), np.arange(1, n)] = -2.0
    return J


def broyden_tridiagonal(n: int) -> Problem:
    if n < 2:
        raise ProblemError(f"broyden tridiagonal needs n >= 2, got {n}")
    return Problem(f"broyden_tridiagonal_n{n}", n, n, _broyden_residual, -np.ones(n),
                   _broyden_jacobian, row_sparsity=3, family="broyden")


# -- tridimensional valley --------------------------------------------------

def _valley_residual(x):
    a, b, c = x[0::3], x[1::3], x[2::3]
    F = np.empty_like(x)
    F[0::3] = (VALLEY_C2 * a**3 + VALLEY_C1 * a) * np.exp(-a**2 / 100.0) - 1.0
    F[1::3] = 10.0 * (np.sin(a) - b)
    F[2::3] = 10.0 * (np.cos(a) - c)
    return F


def _valley_jacobian(x):
    n = x.size
    J = np.zeros((n, n))
    i = np.arange(0, n, 3)
    a = x[i]
    e = np.exp(-a**2 / 100.0)
    J[i, i] = (3 * VALLEY_C2 * a**2 + VALLEY_C1) * e - (VALLEY_C2 * a**3 + VALLEY_C1 * a) * e * a / 50.0
    J[i + 1, i] = 10.0 * np.cos(a)
    J[i + 1, i + 1] = -10.0
    J[i + 2, i] = -10.0 * np.sin(a)
    J[i + 2, i + 2] = -10.0
    return J


def tridimensional_valley(n: int) -> Problem:
    if n < 3 or n % 3:
        raise ProblemError(f"tridimensional valley needs n to be a positive multiple of 3, got {n}")
    x0 = np.tile([-4.0, 1.0, 2.0], n // 3)
    return Problem(f"tridimensional_valley_n{n}", n, n, _valley_residual, x0,
                   _valley_jacobian, row_sparsity=2, family="valley")


# -- extended Freudenstein and Roth -----------------------------------------

def _freudenstein_residual(x):
    a, b = x[0::2], x[1::2]
    F = np.empty_like(x)
    F[0::2] = a + ((5.0 - b) * b - 2.0) * b - 13.0
    F[1::2] = a + ((b + 1.0) * b - 14.0) * b - 29.0
    return F


def _freudenstein_jacobian(x):
    n = x.size
    J = np.zeros((n, n))
    i = np.arange(0, n, 2)
    b = x[i + 1]
    J[i, i] = 1.0
    J[i, i + 1] = -3.0 * b**2 + 10.0 * b - 2.0
    J[i + 1, i] = 1.0
    J[i + 1, i + 1] = 3.0 * b**2 + 2.0 * b - 14.0
    return J


def extended_freudenstein_roth(n: int) -> Problem:
    if n < 2 or n % 2:
        raise ProblemError(f"extended Freudenstein-Roth needs an even n >= 2, got {n}")
    x0 = np.tile([90.0, 60.0], n // 2)
    return Problem(f"extended_freudenstein_roth_n{n}", n, n, _freudenstein_residual, x0,
                   _freudenstein_jacobian, row_sparsity=2, family="freudenstein")


# -- trigonometric system ---------------------------------------------------

def _trig_residual(x):
    n = x.size
    level = np.arange(n) // 5  # l = floor((i - 1) / 5) for 1-based i
    block_cos = np.cos(x).reshape(-1, 5).sum(axis=1)
    return 5.0 - (level + 1) * (1.0 - np.cos(x)) - np.sin(x) - block_cos[level]


def _trig_jacobian(x):
    n = x.size
    level = np.arange(n) // 5
    J = np.zeros((n, n))
    for i in range(n):
        cols = slice(5 * level[i], 5 * level[i] + 5)
        J[i, cols] = np.sin(x[cols])
    J[np.arange(n), np.arange(n)] += -(level + 1) * np.sin(x) - np.cos(x)
    return J


def trigonometric_system(n: int) -> Problem:
    if n < 5 or n % 5:
        raise ProblemError(f"trigonometric system needs n to be a positive multiple of 5, got {n}")
    x0 = np.arange(1, n + 1) / n
    # Own column i lies inside block l, so each row touches exactly 5 columns.
    return Problem(f"trigonometric_system_n{n}", n, n, _trig_residual, x0,
                   _trig_jacobian, row_sparsity=5, family="trig")


# -- registry ---------------------------------------------------------------

FAMILIES: dict[str, Callable[[int], Problem]] = {
    "broyden": broyden_tridiagonal,
    "valley": tridimensional_valley,
    "freudenstein": extended_freudenstein_roth,
    "trig": trigonometric_system,
}

ALIASES = {
    "broyden_tridiagonal": "broyden",
    "tridimensional_valley": "valley",
    "extended_freudenstein_roth": "freudenstein",
    "freudenstein_roth": "freudenstein",
    "trigonometric_system": "trig",
    "trigonometric": "trig",
}

# Problem sizes used in the benchmark suite (n ~ 100, rounded to each family's divisor).
DEFAULT_SIZES = {"broyden": 100, "valley": 102, "freudenstein": 100, "trig": 100}


def check_problem(problem: Problem, fd_tol: float = 1e-5) -> None:
    """Raise ``ProblemError`` unless the problem's invariants hold at its initial point."""
    x0 = np.asarray(problem.initial_point, dtype=float)
    if x0.shape != (problem.n,):
        raise ProblemError(f"{problem.name}: initial point has shape {x0.shape}, expected ({problem.n},)")
    F0 = problem(x0)
    if F0.shape != (problem.m,):
        raise ProblemError(f"{problem.name}: residual has shape {F0.shape}, expected ({problem.m},)")
    if not np.all(np.isfinite(F0)):
        raise ProblemError(f"{problem.name}: residual is not finite at the initial point")
    if problem.jacobian is None:
        return
    J = np.asarray(problem.jacobian(x0), dtype=float)
    J_fd = forward_difference_jacobian(problem, x0, F0)
    err = np.max(np.abs(J - J_fd))
    if not err <= fd_tol * max(1.0, np.max(np.abs(J))):
        raise ProblemError(f"{problem.name}: analytic Jacobian disagrees with finite differences "
                           f"(max error {err:.3e})")
    if problem.row_sparsity is not None:
        worst = int(np.max(np.count_nonzero(J, axis=1)))
        if worst > problem.row_sparsity:
            raise ProblemError(f"{problem.name}: Jacobian row has {worst} nonzeros, "
                               f"declared row_sparsity={problem.row_sparsity}")


class Registry:
    """Name -> Problem map plus the parameterised built-in families."""

    def __init__(self):
        self._problems: dict[str, Problem] = {}
        self._lock = threading.Lock()

    def register(self, problem: Problem) -> Problem:
        check_problem(problem)
        with self._lock:
            if problem.name in self._problems:
                raise ProblemError(f"duplicate problem name {problem.name!r}")
            self._problems[problem.name] = problem
        return problem

    def unregister(self, name: str) -> None:
        with self._lock:
            self._problems.pop(name, None)

    def get(self, name: str, n: int | None = None) -> Problem:
        """Look up a registered problem, or build a family member when ``n`` is given."""
        if name in self._problems:
            return self._problems[name]
        family = ALIASES.get(name, name)
        if family in FAMILIES:
            size = DEFAULT_SIZES[family] if n is None else int(n)
            return FAMILIES[family](size)
        raise KeyError(f"unknown problem {name!r}; registered: {sorted(self._problems)}, "
                       f"families: {sorted(FAMILIES)}")

    def names(self) -> list[str]:
        return sorted(self._problems)

    def __contains__(self, name: str) -> bool:
        return name in self._problems or ALIASES.get(name, name) in FAMILIES


registry = Registry()


def register(problem: Problem) -> Problem:
    return registry.register(problem)


def get_problem(name: str, n: int | None = None) -> Problem:
    return registry.get(name, n)
