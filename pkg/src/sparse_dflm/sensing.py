"""Random interpolation-direction matrices and RIP diagnostics.

Each row of a sensing matrix is one random direction ``v^j``; the solver
probes the residual map at ``x + sigma * v^j``.  Three entry distributions
are supported, all normalised so that ``E[A^T A] = I``:

* Gaussian:       a_ij ~ N(0, 1/p)
* Bernoulli:      a_ij = +-1/sqrt(p), each with probability 1/2
* Bernoulli-like: a_ij = +-sqrt(3/p) w.p. 1/6 each, 0 w.p. 2/3
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Distribution",
    "SensingMatrix",
    "generate",
    "make_rng",
    "recommended_p",
    "rip_constant_bruteforce",
    "row_norm_bound",
    "EnumerationCapExceeded",
]

DEFAULT_ENUMERATION_CAP = 10**6


class EnumerationCapExceeded(ValueError):
    """Brute-force enumeration would visit too many subsets."""


class Distribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    BERNOULLI_LIKE = "bernoulli_like"

    @classmethod
    def parse(cls, value: "str | Distribution") -> "Distribution":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"normal": "gaussian", "bernoullilike": "bernoulli_like", "sparse": "bernoulli_like"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown distribution {value!r}; expected one of "
                             f"{[d.value for d in cls]}") from None


@dataclass(frozen=True)
class SensingMatrix:
    """A p-by-n matrix whose rows are the interpolation directions."""

    entries: np.ndarray
    distribution: Distribution
    seed: int | tuple[int, ...] | None = None

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def overdetermined(self) -> bool:
        """True when p >= n, i.e. outside the compressed-sensing regime."""
        return self.p >= self.n

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=1)

    def max_row_norm(self) -> float:
        """Empirical bound on ``||v^j||``; the only bound available for Gaussian rows."""
        return float(self.row_norms().max())


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by an int or a tuple of ints.

    Tuples are hashed through ``SeedSequence``, which is how per-iteration
    streams are derived from a run seed: ``make_rng((run_seed, k))``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        ss = np.random.SeedSequence([int(s) & 0xFFFFFFFFFFFFFFFF for s in seed])
    else:
        ss = np.random.SeedSequence(None if seed is None else int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(ss))


def generate(p: int, n: int, dist: "Distribution | str" = Distribution.BERNOULLI, seed=None) -> SensingMatrix:
    """Draw a p-by-n sensing matrix with i.i.d. entries from ``dist``.

    Identical ``(p, n, dist, seed)`` always yields a bit-identical matrix.
    """
    p, n = int(p), int(n)
    if p < 1 or n < 1:
        raise ValueError(f"need p >= 1 and n >= 1, got p={p}, n={n}")
    dist = Distribution.parse(dist)
    rng = make_rng(seed)
    if dist is Distribution.GAUSSIAN:
        a = rng.normal(0.0, 1.0 / math.sqrt(p), size=(p, n))
    elif dist is Distribution.BERNOULLI:
        signs = rng.integers(0, 2, size=(p, n), dtype=np.int8)
        a = np.where(signs == 1, 1.0, -1.0) / math.sqrt(p)
    else:
        draw = rng.integers(0, 6, size=(p, n), dtype=np.int8)
        scale = math.sqrt(3.0 / p)
        a = np.zeros((p, n))
        a[draw == 0] = scale
        a[draw == 1] = -scale
    return SensingMatrix(a, dist, seed if not isinstance(seed, list) else tuple(seed))


def row_norm_bound(dist: "Distribution | str", p: int, n: int) -> float | None:
    """Deterministic bound on row norms, ``None`` for Gaussian rows."""
    dist = Distribution.parse(dist)
    if dist is Distribution.BERNOULLI:
        return math.sqrt(n / p)
    if dist is Distribution.BERNOULLI_LIKE:
        return math.sqrt(3.0 * n / p)
    return None


def recommended_p(n: int, s: int, a1: float = 1.0) -> int:
    """Interpolation count ``ceil(2s log(n/2s) / a1)`` clamped to ``[1, n-1]``.

    ``a1`` is an unknown universal constant in the underlying RIP bound, so
    the result is advisory; nothing in the solver calls this implicitly.
    """
    if s < 1:
        raise ValueError("sparsity level must be >= 1")
    if a1 <= 0:
        raise ValueError("a1 must be positive")
    if 2 * s >= n:
        raise ValueError(f"sparsity too high for sizing rule: 2s={2 * s} >= n={n}")
    p = math.ceil(2 * s * math.log(n / (2 * s)) / a1)
    return int(min(max(p, 1), n - 1))


def rip_constant_bruteforce(A, s: int, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact s-RIP constant by enumerating every s-column submatrix.

    Returns ``max_B max(lambda_max(B^T B) - 1, 1 - lambda_min(B^T B))``.
    Intended as a test oracle only.
    """
    a = A.entries if isinstance(A, SensingMatrix) else np.asarray(A, dtype=float)
    n = a.shape[1]
    if not 1 <= s <= n:
        raise ValueError(f"sparsity level must satisfy 1 <= s <= n, got s={s}, n={n}")
    count = math.comb(n, s)
    if count > cap:
        raise EnumerationCapExceeded(
            f"instance too large for brute force: C({n},{s})={count} > cap {cap}")
    gram = a.T @ a
    delta = 0.0
    chunk = max(1, 200_000 // (s * s))
    combos = itertools.combinations(range(n), s)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        sub = gram[block[:, :, None], block[:, None, :]]
        eig = np.linalg.eigvalsh(sub)
        delta = max(delta, float(np.max(eig[:, -1] - 1.0)), float(np.max(1.0 - eig[:, 0])))
    return delta
