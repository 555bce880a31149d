"""CSV and SVG output for benchmark results.

Everything written here is a pure function of its inputs: floats use 17
significant digits and wall times are only written on request, so two
identical benchmark runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..records import RunRecord, fmt_float
from .profile import PerformanceProfile

SUMMARY_COLUMNS = ["solver", "problem", "seed", "final_f", "fevals", "stop_reason", "wall_time_ms"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def profile_csv(prof: PerformanceProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", *prof.solvers])
    for a, alpha in enumerate(prof.alphas):
        w.writerow([fmt_float(alpha), *(fmt_float(v) for v in prof.pi[:, a])])
    return buf.getvalue()


def summary_csv(records: Sequence[RunRecord], timing: bool = False) -> str:
    """One row per run; ``wall_time_ms`` stays empty unless ``timing`` is set."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in records:
        wall = fmt_float(r.wall_time * 1e3) if timing else ""
        w.writerow([r.solver_id, r.problem_id, r.seed, fmt_float(r.final_f), r.fevals, r.stop_reason, wall])
    return buf.getvalue()


def profile_svg(prof: PerformanceProfile, title: str | None = None) -> str:
    """Static step plot of pi_s against log2(alpha)."""
    W, H = 640, 420
    left, right, top, bottom = 60, 170, 40, 50
    pw, ph = W - left - right, H - top - bottom
    logs = np.log2(prof.alphas) if prof.alphas.size else np.zeros(1)
    xmax = max(float(logs.max()), 1.0)

    def X(v):
        return "%.2f" % (left + pw * v / xmax)

    def Y(v):
        return "%.2f" % (top + ph * (1.0 - v))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    if title is None and prof.tau is not None:
        title = f"Performance profile, tau = {prof.tau:g}"
    if title:
        out.append(f'<text x="{W // 2}" y="22" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in range(0, 11, 2):
        yv = t / 10
        out.append(f'<line x1="{left - 4}" y1="{Y(yv)}" x2="{left}" y2="{Y(yv)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y(yv)}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="11">{yv:.1f}</text>')
    step = max(1, math.ceil(xmax / 8))
    for t in range(0, int(math.floor(xmax)) + 1, step):
        out.append(f'<line x1="{X(t)}" y1="{top + ph}" x2="{X(t)}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X(t)}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{t}</text>')
    out.append(f'<text x="{left + pw // 2}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">log2(alpha)</text>')
    out.append(f'<text x="16" y="{top + ph // 2}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {top + ph // 2})">pi(alpha)</text>')

    for i, name in enumerate(prof.solvers):
        color = _PALETTE[i % len(_PALETTE)]
        pts = []
        for a in range(prof.alphas.size):
            if a:
                pts.append(f"{X(logs[a])},{Y(prof.pi[i, a - 1])}")
            pts.append(f"{X(logs[a])},{Y(prof.pi[i, a])}")
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(pts)}"/>')
        ly = top + 14 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}" dominant-baseline="middle" font-family="sans-serif" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write(path: Path, text: str, overwrite: bool) -> Path:
    if path.exists() and not overwrite:
        raise FileExistsError(f"refusing to overwrite existing file {path}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def tau_tag(tau: float | None) -> str:
    return "all" if tau is None else f"{tau:.0e}".replace("+", "")


def write_profile(prof: PerformanceProfile, out_dir: str | Path, overwrite: bool = False) -> list[Path]:
    """Write ``profile_tau<tau>.csv`` and ``.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    stem = f"profile_tau{tau_tag(prof.tau)}"
    return [_write(out_dir / f"{stem}.csv", profile_csv(prof), overwrite),
            _write(out_dir / f"{stem}.svg", profile_svg(prof), overwrite)]


def write_summary(records: Sequence[RunRecord], out_dir: str | Path, timing: bool = False,
                  overwrite: bool = False) -> Path:
    return _write(Path(out_dir) / "summary.csv", summary_csv(records, timing), overwrite)


def emit_reports(prof: PerformanceProfile, records: Sequence[RunRecord], out_dir: str | Path,
                 timing: bool = False, overwrite: bool = False) -> list[Path]:
    """Profile CSV, run-summary CSV and SVG plot in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [*write_profile(prof, out_dir, overwrite), write_summary(records, out_dir, timing, overwrite)]
