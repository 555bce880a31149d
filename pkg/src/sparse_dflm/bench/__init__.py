"""Benchmark driver, performance profiles and report files."""

from .profile import (AVERAGED, DEFAULT_TAUS, PER_RUN, PerformanceProfile, averaged_trace,
                      default_alphas, feval_matrix, least_fevals, profile, threshold)
from .report import (SUMMARY_COLUMNS, emit_reports, profile_csv, profile_svg, summary_csv,
                     write_profile, write_summary)
from .suite import SolverSpec, THREADS_ENV, default_solvers, run_one, run_seed, run_suite, worker_count

__all__ = [
    "AVERAGED",
    "DEFAULT_TAUS",
    "PER_RUN",
    "PerformanceProfile",
    "SUMMARY_COLUMNS",
    "SolverSpec",
    "THREADS_ENV",
    "averaged_trace",
    "default_alphas",
    "default_solvers",
    "emit_reports",
    "feval_matrix",
    "least_fevals",
    "profile",
    "profile_csv",
    "profile_svg",
    "run_one",
    "run_seed",
    "run_suite",
    "summary_csv",
    "threshold",
    "worker_count",
    "write_profile",
    "write_summary",
]
