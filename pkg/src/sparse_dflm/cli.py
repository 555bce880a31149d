"""Command-line front end: ``solve``, ``bench``, ``profile`` and ``validate``.

Exit codes: 0 success, 1 failed validation or failed run, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bench import (AVERAGED, DEFAULT_TAUS, PER_RUN, default_solvers, feval_matrix, profile,
                    run_suite, write_profile, write_summary)
from .config import SolverConfig
from .problems import FAMILIES, ProblemError, get_problem
from .records import dumps, read_records, write_history_csv
from .solver import solve, solve_fd_baseline

log = logging.getLogger("sparse_dflm")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 2."""


# -- configuration ------------------------------------------------------------

def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(d: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    for part in parts[:-1]:
        cur = d.get(part)
        if not isinstance(cur, dict):
            cur = {}
            d[part] = cur
        d = cur
    d[parts[-1]] = value


def load_config_document(path: str | Path) -> dict:
    """Read a config JSON; a run summary (with a ``config`` key) also works."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    return doc


def resolve_config(args: argparse.Namespace, extra: dict | None = None) -> SolverConfig:
    """Defaults, then the config file, then ``--set`` pairs, then dedicated flags."""
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        data.update(load_config_document(args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_dotted(data, key.strip(), _parse_value(value.strip()))
    flags = {
        "distribution": getattr(args, "distribution", None),
        "seed": getattr(args, "seed", None),
        "max_fevals": getattr(args, "max_fevals", None),
        "mode": getattr(args, "mode", None),
        "xi": getattr(args, "xi", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    data.update(extra or {})
    try:
        return SolverConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _p_policy(args: argparse.Namespace) -> dict | None:
    if getattr(args, "p_adaptive", False):
        return {"kind": "adaptive"}
    if getattr(args, "p", None) is not None:
        return {"kind": "fixed", "p": args.p}
    return None


def new_run_dir(root: str | Path, label: str, payload: Any) -> Path:
    """Create ``root/<timestamp>-<hash>``; never reuses an existing directory."""
    root = Path(root)
    digest = hashlib.sha256(dumps(payload, sort_keys=True).encode()).hexdigest()[:8]
    base = f"{time.strftime('%Y%m%dT%H%M%S')}-{label}-{digest}"
    root.mkdir(parents=True, exist_ok=True)
    for i in range(1000):
        path = root / (base if i == 0 else f"{base}-{i}")
        try:
            path.mkdir()
            return path
        except FileExistsError:
            continue
    raise UsageError(f"could not allocate a fresh run directory under {root}")


def parse_seeds(text: str) -> list[int]:
    """``"1..5"``, ``"1,3,9"`` or a single integer."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, hi = (int(v) for v in part.split("..", 1))
                if hi < lo:
                    raise UsageError(f"empty seed range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}; use e.g. 1..50 or 1,2,3") from None
    if not out:
        raise UsageError("no seeds given")
    return out


def _split_list(values: Sequence[str] | None) -> list[str]:
    out = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _problem(name: str, n: int | None):
    try:
        return get_problem(name, n)
    except (ProblemError, KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None


# -- commands -----------------------------------------------------------------

def cmd_solve(args: argparse.Namespace) -> int:
    problem = _problem(args.problem, args.n)
    extra = {}
    pol = _p_policy(args)
    if pol is not None:
        extra["p_policy"] = pol
    cfg = resolve_config(args, extra)
    try:
        cfg.schedule(problem.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    runner = solve_fd_baseline if args.solver == "fd-lm" else solve
    rec = runner(problem, cfg, solver_id=args.solver)

    out = new_run_dir(args.output_dir, "solve", {"problem": problem.name, "cfg": cfg.to_dict()})
    write_history_csv(out / "history.csv", rec.history)
    summary = rec.to_dict(include_history=False)
    summary.update(problem=args.problem, n=problem.n, solver=args.solver, version=__version__)
    (out / "summary.json").write_text(dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"{problem.name}: {rec.stop_reason} after {rec.fevals} fevals, f = {rec.final_f:.6e}")
    print(f"wrote {out}")
    if rec.stop_reason == "error":
        print(f"run failed: {rec.error}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    names = _split_list(args.problems) or list(FAMILIES)
    problems = []
    for name in names:
        base, _, size = name.partition(":")
        try:
            n = int(size) if size else args.n
        except ValueError:
            raise UsageError(f"bad problem size in {name!r}") from None
        problems.append(_problem(base, n))
    catalog = {s.solver_id: s for s in default_solvers()}
    wanted = _split_list(args.solvers) or list(catalog)
    unknown = [s for s in wanted if s not in catalog]
    if unknown:
        raise UsageError(f"unknown solvers {unknown}; choose from {sorted(catalog)}")
    solvers = [catalog[s] for s in wanted]
    seeds = parse_seeds(args.seeds)
    cfg = resolve_config(args)
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be positive")

    meta = {"problems": [p.name for p in problems], "solvers": wanted, "seeds": seeds,
            "config": cfg.to_dict(), "version": __version__}
    out = new_run_dir(args.output_dir, "bench", meta)
    log.info("running %d problems x %d solvers x %d seeds into %s",
             len(problems), len(solvers), len(seeds), out)
    records = run_suite(problems, solvers, seeds, cfg, workers=args.workers,
                        records_path=out / "records.jsonl", keep_history=args.history)
    write_summary(records, out, timing=args.timing)
    (out / "bench.json").write_text(dumps(meta, sort_keys=True, indent=2) + "\n")
    failed = sum(r.stop_reason == "error" for r in records)
    print(f"{len(records)} runs ({failed} with errors); wrote {out}")
    return EXIT_OK


def _parse_taus(values: Sequence[str] | None) -> list[float]:
    if not values:
        return list(DEFAULT_TAUS)
    taus = []
    for v in _split_list(values):
        try:
            t = float(v)
        except ValueError:
            raise UsageError(f"cannot parse tau {v!r}") from None
        if not 0 < t < 1:
            raise UsageError(f"tau must lie in (0, 1), got {v}")
        taus.append(t)
    return taus


def cmd_profile(args: argparse.Namespace) -> int:
    src = Path(args.records)
    path = src / "records.jsonl" if src.is_dir() else src
    if not path.is_file():
        raise UsageError(f"no records found at {path}")
    try:
        records = read_records(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not records:
        raise UsageError(f"{path} holds no records")
    taus = _parse_taus(args.tau)
    out = Path(args.output_dir) if args.output_dir else path.parent
    out.mkdir(parents=True, exist_ok=True)
    for tau in taus:
        N, solvers, problems = feval_matrix(records, tau, aggregate=args.aggregate)
        prof = profile(N, solvers=solvers, tau=tau, problems=problems)
        try:
            paths = write_profile(prof, out, overwrite=args.force)
        except FileExistsError as exc:
            raise UsageError(f"{exc}; pass --force to replace it") from None
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from .validate import run_checks

    tol = args.recovery_tol
    if not (tol >= 0 and math.isfinite(tol)):
        raise UsageError(f"--recovery-tol must be a nonnegative number, got {tol}")
    results = run_checks(recovery_tol=tol)
    width = max(len(r.name) for r in results)
    for r in results:
        line = f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}"
        if args.verbose:
            line += f"  value={r.value:.3e} limit={r.limit:.3e}"
            if r.detail:
                line += f"  ({r.detail})"
        print(line)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILED


# -- parser -------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring SolverConfig (or a run summary)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config field; dotted keys reach nested fields")
    p.add_argument("--distribution", choices=["gaussian", "bernoulli", "bernoulli_like"])
    p.add_argument("--max-fevals", type=int)
    p.add_argument("--mode", choices=["noiseless", "denoising"])
    p.add_argument("--xi", type=float, help="noise radius for denoising mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-dflm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    parser.add_argument("--debug", action="store_true", help="verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solve and write its history and summary")
    p.add_argument("--problem", required=True, help=f"one of {sorted(FAMILIES)}")
    p.add_argument("--n", type=int, help="dimension (family default if omitted)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--p", type=int, help="fixed number of interpolation points")
    group.add_argument("--p-adaptive", action="store_true", help="adaptive p policy")
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=["dflm", "fd-lm"], default="dflm")
    p.add_argument("--output-dir", default="runs")
    _add_config_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run the solver x problem x seed matrix")
    p.add_argument("--problems", action="append",
                   help="comma-separated families, optionally name:n (default: all)")
    p.add_argument("--n", type=int, help="dimension for every problem (family defaults otherwise)")
    p.add_argument("--solvers", action="append",
                   help="comma-separated solver ids (default: " + ",".join(s.solver_id for s in default_solvers())
                   + ")")
    p.add_argument("--seeds", default="1..50", help="e.g. 1..50 or 1,2,3 (default 1..50)")
    p.add_argument("--workers", type=int, help="process count (capped by SPARSE_DFLM_THREADS)")
    p.add_argument("--timing", action="store_true",
                   help="fill wall_time_ms in summary.csv (makes the file run-dependent)")
    p.add_argument("--history", action="store_true", help="keep per-iteration histories in records.jsonl")
    p.add_argument("--output-dir", default="runs")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="performance profiles from bench records")
    p.add_argument("--records", required=True, help="bench run directory or records.jsonl")
    p.add_argument("--tau", action="append",
                   help="accuracy level(s), comma-separated (default 1e-2,1e-4,1e-6,1e-8)")
    p.add_argument("--aggregate", choices=[AVERAGED, PER_RUN], default=AVERAGED,
                   help="threshold the seed-averaged trace, or each run then average")
    p.add_argument("--output-dir", help="where to write (default: next to the records)")
    p.add_argument("--force", action="store_true", help="replace existing profile files")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("validate", help="small-scale invariant checks")
    p.add_argument("--verbose", action="store_true", help="print measured values")
    p.add_argument("--recovery-tol", type=float, default=1e-6,
                   help="largest recovery error accepted by the recovery checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    level = logging.ERROR if args.quiet else logging.DEBUG if args.debug else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
