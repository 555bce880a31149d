"""Solver configuration and its JSON round-trip."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .recovery import SolverOptions
from .sensing import Distribution


@dataclass(frozen=True)
class FixedP:
    """Constant interpolation count; ``None`` means ``ceil(n/3)``."""

    p: int | None = None


@dataclass(frozen=True)
class AdaptiveP:
    """Grow p by ``p_diff`` after accepted steps, shrink after rejections.

    ``None`` fields default to ``ceil(n/3)``, ``ceil(n/4)``, ``ceil(n/2)`` and
    ``ceil(n/10)`` respectively.
    """

    p_init: int | None = None
    p_min: int | None = None
    p_max: int | None = None
    p_diff: int | None = None


@dataclass(frozen=True)
class PSchedule:
    """A p policy with every size resolved for a concrete dimension."""

    p_init: int
    p_min: int
    p_max: int
    p_diff: int
    adaptive: bool


@dataclass
class SolverConfig:
    eta0: float = 1e-3
    eta1: float = 1e-4
    eta2: float = 1e3
    gamma1: float = 0.25
    gamma2: float = 4.0
    theta0: float = 1e-8
    theta_min: float = 1e-8
    epsilon0: float = 1e-6
    sigma0: float = 1.0
    sigma_bounds: tuple[float, float] = (1e-9, 1e-7)
    # Use sigma_k = ||d_{k-1}|| unclamped.
    sigma_theory: bool = False
    max_fevals: int | None = None
    distribution: Distribution = Distribution.BERNOULLI
    p_policy: FixedP | AdaptiveP = field(default_factory=FixedP)
    mode: str = "noiseless"
    xi: float | None = None
    lipschitz_estimate: float | None = None
    step_tol: float = 1e-6
    rel_decrease_tol: float = 1e-6
    seed: int = 0
    fd_step: float = 1.5e-8
    recovery: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.distribution = Distribution.parse(self.distribution)
        self.sigma_bounds = tuple(float(v) for v in self.sigma_bounds)
        if isinstance(self.p_policy, int):
            self.p_policy = FixedP(self.p_policy)
        self.validate()

    def validate(self) -> None:
        problems = []
        if not 0 < self.eta0 < 1:
            problems.append("need 0 < eta0 < 1")
        if not 0 < self.eta1 < self.eta2:
            problems.append("need 0 < eta1 < eta2")
        if not 0 < self.gamma1 < 1 < self.gamma2:
            problems.append("need 0 < gamma1 < 1 < gamma2")
        if not self.theta0 >= self.theta_min > 0:
            problems.append("need theta0 >= theta_min > 0")
        lo, hi = self.sigma_bounds
        if not 0 < lo <= hi:
            problems.append("need 0 < sigma_bounds[0] <= sigma_bounds[1]")
        if self.sigma0 <= 0:
            problems.append("need sigma0 > 0")
        if self.mode not in ("noiseless", "denoising"):
            problems.append(f"mode must be 'noiseless' or 'denoising', got {self.mode!r}")
        if self.mode == "denoising" and self.xi is None and self.lipschitz_estimate is None:
            problems.append("denoising mode needs xi or lipschitz_estimate")
        if self.max_fevals is not None and self.max_fevals < 1:
            problems.append("max_fevals must be positive")
        if problems:
            raise ValueError("invalid solver config: " + "; ".join(problems))

    def budget(self, n: int) -> int:
        return int(self.max_fevals) if self.max_fevals is not None else 1000 * (n + 1)

    def schedule(self, n: int) -> PSchedule:
        pol = self.p_policy
        if isinstance(pol, FixedP):
            p = math.ceil(n / 3) if pol.p is None else int(pol.p)
            if p < 1:
                raise ValueError(f"p must be >= 1, got {p}")
            return PSchedule(p, p, p, 0, adaptive=False)
        p_min = math.ceil(n / 4) if pol.p_min is None else int(pol.p_min)
        p_max = math.ceil(n / 2) if pol.p_max is None else int(pol.p_max)
        p_init = math.ceil(n / 3) if pol.p_init is None else int(pol.p_init)
        p_diff = math.ceil(n / 10) if pol.p_diff is None else int(pol.p_diff)
        if not 1 <= p_min <= p_max:
            raise ValueError(f"need 1 <= p_min <= p_max, got {p_min}, {p_max}")
        return PSchedule(min(max(p_init, p_min), p_max), p_min, p_max, p_diff, adaptive=True)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["distribution"] = self.distribution.value
        d["sigma_bounds"] = list(self.sigma_bounds)
        pol = self.p_policy
        kind = "fixed" if isinstance(pol, FixedP) else "adaptive"
        d["p_policy"] = {"kind": kind, **dataclasses.asdict(pol)}
        d["recovery"] = dataclasses.asdict(self.recovery)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SolverConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        if "p_policy" in data:
            data["p_policy"] = parse_p_policy(data["p_policy"])
        if "recovery" in data and isinstance(data["recovery"], dict):
            data["recovery"] = SolverOptions(**data["recovery"])
        if "sigma_bounds" in data:
            data["sigma_bounds"] = tuple(data["sigma_bounds"])
        return cls(**data)

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def load(cls, path: str | Path) -> "SolverConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def parse_p_policy(spec) -> FixedP | AdaptiveP:
    if isinstance(spec, (FixedP, AdaptiveP)):
        return spec
    if spec is None:
        return FixedP()
    if isinstance(spec, int):
        return FixedP(spec)
    spec = dict(spec)
    kind = spec.pop("kind", "fixed")
    if kind == "fixed":
        return FixedP(**spec)
    if kind == "adaptive":
        return AdaptiveP(**spec)
    raise ValueError(f"unknown p policy kind {kind!r}")
