"""Run a (problem x solver x seed) matrix and collect the records."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..config import AdaptiveP, FixedP, SolverConfig
from ..problems import Problem
from ..records import RunRecord, write_records
from ..solver import solve, solve_fd_baseline

log = logging.getLogger(__name__)

THREADS_ENV = "SPARSE_DFLM_THREADS"


@dataclass(frozen=True)
class SolverSpec:
    """One column of the benchmark: a solver kind plus its p policy.

    ``p_divisor`` selects ``p = ceil(n / p_divisor)``; ``None`` keeps the
    policy of the base config.  ``adaptive`` switches to the adaptive
    policy with its default sizes.
    """

    solver_id: str
    kind: str = "dflm"
    p_divisor: int | None = None
    adaptive: bool = False

    def __post_init__(self):
        if self.kind not in ("dflm", "fd"):
            raise ValueError(f"solver kind must be 'dflm' or 'fd', got {self.kind!r}")

    def configure(self, cfg: SolverConfig, n: int) -> SolverConfig:
        if self.kind == "fd":
            return cfg
        if self.adaptive:
            return cfg.replace(p_policy=AdaptiveP())
        if self.p_divisor is not None:
            return cfg.replace(p_policy=FixedP(math.ceil(n / self.p_divisor)))
        return cfg


def default_solvers() -> list[SolverSpec]:
    return [
        SolverSpec("dflm-p2", p_divisor=2),
        SolverSpec("dflm-p3", p_divisor=3),
        SolverSpec("dflm-p4", p_divisor=4),
        SolverSpec("dflm-adaptive", adaptive=True),
        SolverSpec("fd-lm", kind="fd"),
    ]


def run_seed(solver_id: str, problem_id: str, seed: int) -> int:
    """Stable 63-bit seed for one triple, independent of process and hash salt."""
    digest = hashlib.sha256(f"{solver_id}\x1f{problem_id}\x1f{int(seed)}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def worker_count(requested: int | None = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def run_one(problem: Problem, spec: SolverSpec, seed: int, cfg: SolverConfig) -> RunRecord:
    """Execute one triple; any exception becomes an error record."""
    t0 = time.perf_counter()
    try:
        run_cfg = spec.configure(cfg, problem.n).replace(seed=run_seed(spec.solver_id, problem.name, seed))
        runner = solve_fd_baseline if spec.kind == "fd" else solve
        rec = runner(problem, run_cfg, solver_id=spec.solver_id)
    except Exception as exc:  # isolation: one bad run never aborts the suite
        log.warning("%s on %s (seed %d) failed: %s", spec.solver_id, problem.name, seed, exc)
        log.debug("%s", traceback.format_exc())
        return RunRecord(solver_id=spec.solver_id, problem_id=problem.name, seed=int(seed), trace=[],
                         final_f=math.nan, stop_reason="error", wall_time=time.perf_counter() - t0,
                         n=problem.n, budget=cfg.budget(problem.n),
                         error=f"{type(exc).__name__}: {exc}")
    rec.seed = int(seed)
    return rec


def _run_packed(args):
    return run_one(*args)


def run_suite(problems: Sequence[Problem], solvers: Sequence[SolverSpec], seeds: Sequence[int],
              cfg: SolverConfig | None = None, *, workers: int | None = None,
              records_path: str | Path | None = None, keep_history: bool = True) -> list[RunRecord]:
    """Run every (problem, solver, seed) triple.

    Records come back in problem-major, then solver, then seed order no
    matter which worker finished first.  With ``records_path`` they are
    also written as JSON lines.
    """
    if not problems:
        raise ValueError("run_suite needs at least one problem")
    if not solvers:
        raise ValueError("run_suite needs at least one solver")
    if not seeds:
        raise ValueError("run_suite needs at least one seed")
    ids = [s.solver_id for s in solvers]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate solver ids: {ids}")
    cfg = cfg or SolverConfig()

    jobs = [(p, s, int(seed), cfg) for p in problems for s in solvers for seed in seeds]
    nw = min(worker_count(workers), len(jobs))
    if nw == 1:
        records = [run_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            records = list(pool.map(_run_packed, jobs, chunksize=1))
    if not keep_history:
        for r in records:
            r.history = []
    if records_path is not None:
        write_records(records_path, records)
    return records
