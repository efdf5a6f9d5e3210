"""Minimal hand-written SVG line chart for metrics.csv."""
from __future__ import annotations

import csv
import math
from pathlib import Path

METRIC_COLUMNS = ["step", "train_loss", "eval_success_rate", "eval_mean_reward", "eval_reward_std", "wallclock_s"]
SERIES = [("train_loss", "#1f77b4"), ("eval_success_rate", "#d62728")]

W, H = 640, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 20, 50


class MetricsFormatError(ValueError):
    pass


def read_metrics(path) -> list[dict[str, float | None]]:
    """Parse metrics.csv; empty cells become None. Bad rows raise with their line number."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRIC_COLUMNS:
            raise MetricsFormatError(f"{path}:1: expected header {','.join(METRIC_COLUMNS)}")
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(METRIC_COLUMNS):
                raise MetricsFormatError(f"{path}:{lineno}: expected {len(METRIC_COLUMNS)} fields, got {len(cells)}")
            row = {}
            for name, cell in zip(METRIC_COLUMNS, cells):
                if cell.strip() == "":
                    row[name] = None
                    continue
                try:
                    row[name] = float(cell)
                except ValueError:
                    raise MetricsFormatError(f"{path}:{lineno}: {name} is not a number ({cell!r})") from None
                if not math.isfinite(row[name]):
                    raise MetricsFormatError(f"{path}:{lineno}: {name} is not finite ({cell!r})")
            if row["step"] is None:
                raise MetricsFormatError(f"{path}:{lineno}: step is empty")
            rows.append(row)
    return rows


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "nan"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(rows: list[dict]) -> str:
    """Each series is scaled to its own [min, max] so loss and success share one panel."""
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    steps = [r["step"] for r in rows]
    x_lo, x_hi = (min(steps), max(steps)) if steps else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(v):
        return LEFT + (v - x_lo) / (x_hi - x_lo) * pw

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
           f'<text x="{LEFT + pw / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">step</text>',
           f'<text x="15" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 15 {TOP + ph / 2:.1f})">value (per-series scale)</text>']
    if steps:
        for t in _ticks(x_lo, x_hi):
            out.append(f'<text x="{sx(t):.1f}" y="{TOP + ph + 16}" text-anchor="middle" font-size="10">{_fmt(t)}</text>')
    for idx, (name, color) in enumerate(SERIES):
        pts = [(r["step"], r[name]) for r in rows if r[name] is not None]
        legend_y = TOP + 12 + 14 * idx
        label = name
        if pts:
            lo = min(v for _, v in pts)
            hi = max(v for _, v in pts)
            label = f"{name} [{_fmt(lo)}, {_fmt(hi)}]"
            span = hi - lo if hi > lo else 1.0
            coords = " ".join(f"{sx(s):.1f},{TOP + ph - (v - lo) / span * ph:.1f}" for s, v in pts)
            if len(pts) == 1:
                x, y = coords.split(",")
                out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>')
            else:
                out.append(f'<polyline class="series" data-series="{name}" fill="none" stroke="{color}" '
                           f'stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{legend_y}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_metrics(csv_path, svg_path) -> int:
    rows = read_metrics(csv_path)
    Path(svg_path).write_text(render_svg(rows))
    return len(rows)
