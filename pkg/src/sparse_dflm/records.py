"""Run records, iteration histories and their file formats.

Floats are written with 17 significant digits so that files round-trip and
repeated runs produce byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

HISTORY_COLUMNS = ["k", "fevals", "f", "grad_model_norm", "theta", "lambda", "rho",
                   "step_norm", "accepted", "p"]


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


@dataclass
class IterationRecord:
    k: int
    fevals: int
    f: float
    grad_model_norm: float
    theta: float
    lam: float
    rho: float
    step_norm: float
    accepted: bool
    p: int
    # Diagnostics used by the invariant checks; not part of the CSV.
    pred: float = math.nan
    f_trial: float = math.nan
    model_hessian_norm: float = math.nan
    theta_next: float = math.nan

    def csv_row(self) -> list[str]:
        return [str(self.k), str(self.fevals), fmt_float(self.f), fmt_float(self.grad_model_norm),
                fmt_float(self.theta), fmt_float(self.lam), fmt_float(self.rho),
                fmt_float(self.step_norm), "1" if self.accepted else "0", str(self.p)]


@dataclass
class RunRecord:
    solver_id: str
    problem_id: str
    seed: int
    trace: list[tuple[int, float]]
    final_f: float
    stop_reason: str
    wall_time: float = 0.0
    fevals: int = 0
    budget: int = 0
    n: int = 0
    f0: float = math.nan
    history: list[IterationRecord] = field(default_factory=list)
    x_final: list[float] | None = None
    config: dict[str, Any] | None = None
    error: str | None = None

    def to_dict(self, include_history: bool = True) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["trace"] = [[int(a), float(b)] for a, b in self.trace]
        d["history"] = [asdict(h) for h in self.history] if include_history else []
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunRecord":
        d = dict(d)
        d["trace"] = [(int(a), float(b)) for a, b in d.get("trace", [])]
        d["history"] = [IterationRecord(**h) for h in d.get("history", [])]
        return cls(**d)


def history_csv(history: Iterable[IterationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for h in history:
        w.writerow(h.csv_row())
    return buf.getvalue()


def write_history_csv(path: str | Path, history: Iterable[IterationRecord]) -> Path:
    path = Path(path)
    path.write_text(history_csv(history))
    return path


def _json_default(o):
    import numpy as np

    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj, **kw) -> str:
    return json.dumps(obj, default=_json_default, allow_nan=True, **kw)


def write_records(path: str | Path, records: Iterable[RunRecord]) -> Path:
    """One JSON document per line."""
    path = Path(path)
    with path.open("w") as fh:
        for r in records:
            fh.write(dumps(r.to_dict(), sort_keys=True))
            fh.write("\n")
    return path


def read_records(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(RunRecord.from_dict(json.loads(line)))
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"{path}: corrupted record on line {lineno}: {exc}") from exc
    return out
