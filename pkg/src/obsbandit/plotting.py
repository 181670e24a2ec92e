"""Plain-text SVG figures for the regret experiments.

Output is a pure function of the input data: fixed palette, fixed number
formatting, no timestamps.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")
WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=70, right=170, top=40, bottom=50)
MAX_POINTS = 500

_TRACE_HEAD = re.compile(r"^N,d_y,t,mean_regret,worst_regret,p[0-9.]+_regret,mean_normalized,worst_normalized$")
_SUMMARY_HEAD = re.compile(r"^N,d_y,at_round,mean,worst,p[0-9.]+$")


@dataclass
class CellSeries:
    n_arms: int
    d_y: int
    t: np.ndarray
    mean_normalized: np.ndarray
    worst_normalized: np.ndarray


def _read_rows(path, header_re, what):
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not lines or not header_re.match(lines[0].strip()):
        raise SchemaError(f"{path}: not a {what} file (bad header)")
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    n_cols = lines[0].count(",") + 1
    for i, row in enumerate(rows, start=2):
        if len(row) != n_cols:
            raise SchemaError(f"{path}:{i}: expected {n_cols} fields, got {len(row)}")
    return lines[0].split(","), rows


def _num(value: str, where: str, integer=False):
    try:
        return int(value) if integer else float(value)
    except ValueError:
        raise SchemaError(f"{where}: bad number {value!r}") from None


def read_traces(path) -> list[CellSeries]:
    _, rows = _read_rows(path, _TRACE_HEAD, "trace")
    cells: dict[tuple[int, int], list] = {}
    for i, row in enumerate(rows, start=2):
        where = f"{path}:{i}"
        key = (_num(row[0], where, True), _num(row[1], where, True))
        t = _num(row[2], where, True)
        if t < 2:
            continue  # normalized values undefined at t = 1
        cells.setdefault(key, []).append((t, _num(row[6], where), _num(row[7], where)))
    out = []
    for (n, d), pts in sorted(cells.items()):
        arr = np.array(pts, dtype=float)
        out.append(CellSeries(n, d, arr[:, 0], arr[:, 1], arr[:, 2]))
    if not out:
        raise SchemaError(f"{path}: no rounds t >= 2")
    return out


def read_summary(path) -> tuple[str, list[tuple]]:
    header, rows = _read_rows(path, _SUMMARY_HEAD, "summary")
    parsed = []
    for i, row in enumerate(rows, start=2):
        where = f"{path}:{i}"
        parsed.append(
            (
                _num(row[0], where, True),
                _num(row[1], where, True),
                _num(row[2], where, True),
                _num(row[3], where),
                _num(row[4], where),
                _num(row[5], where),
            )
        )
    return header[5], parsed


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _tick_label(v: float) -> str:
    return f"{v:g}"


class _Canvas:
    def __init__(self, title: str, note: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>',
            f'<text x="{WIDTH - 6}" y="{HEIGHT - 6}" text-anchor="end" font-family="monospace" font-size="9" fill="#666666">{note}</text>',
        ]
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def axes(self, xlo, xhi, ylo, yhi, xlabel, ylabel, xticks=True):
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        p = self.parts
        p.append('<g stroke="#000000" stroke-width="1" fill="none">')
        p.append(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x1}" y2="{self.y0}"/>')
        p.append(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x0}" y2="{self.y1}"/>')
        p.append("</g>")
        for v in _nice_ticks(ylo, yhi):
            y = self.sy(v)
            p.append(f'<line x1="{self.x0 - 4}" y1="{_f(y)}" x2="{self.x0}" y2="{_f(y)}" stroke="#000000"/>')
            p.append(
                f'<text x="{self.x0 - 7}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{_tick_label(v)}</text>'
            )
        if xticks:
            for v in _nice_ticks(xlo, xhi):
                x = self.sx(v)
                p.append(f'<line x1="{_f(x)}" y1="{self.y0}" x2="{_f(x)}" y2="{self.y0 + 4}" stroke="#000000"/>')
                p.append(
                    f'<text x="{_f(x)}" y="{self.y0 + 17}" text-anchor="middle" font-family="sans-serif" font-size="11">{_tick_label(v)}</text>'
                )
        p.append(
            f'<text x="{(self.x0 + self.x1) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>'
        )
        cy = (self.y0 + self.y1) / 2
        p.append(
            f'<text x="16" y="{cy:.2f}" transform="rotate(-90 16 {cy:.2f})" text-anchor="middle" font-family="sans-serif" font-size="12">{ylabel}</text>'
        )

    def sx(self, v):
        return self.x0 + (v - self.xlo) / (self.xhi - self.xlo) * (self.x1 - self.x0)

    def sy(self, v):
        return self.y0 - (v - self.ylo) / (self.yhi - self.ylo) * (self.y0 - self.y1)

    def legend(self, entries):
        x = self.x1 + 14
        for i, (label, color, dashed) in enumerate(entries):
            y = self.y1 + 12 + 16 * i
            dash = ' stroke-dasharray="5,3"' if dashed else ""
            self.parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 22}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>')
            self.parts.append(f'<text x="{x + 28}" y="{y + 4}" font-family="sans-serif" font-size="11">{label}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _thin(n: int) -> np.ndarray:
    if n <= MAX_POINTS:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, MAX_POINTS).round().astype(int))


def figure_normalized(series: list[CellSeries], note: str = "") -> str:
    """Normalized regret against time: solid mean and dashed worst per cell."""
    if not series:
        raise SchemaError("no series to plot")
    tmax = max(float(s.t[-1]) for s in series)
    tmin = min(float(s.t[0]) for s in series)
    if tmax <= tmin:
        tmax = tmin + 1.0
    yhi = max(float(np.max(s.worst_normalized)) for s in series)
    ylo = min(0.0, min(float(np.min(s.mean_normalized)) for s in series))
    if yhi <= ylo:
        yhi = ylo + 1.0
    c = _Canvas("Normalized regret Regret(t)/log t", note)
    c.axes(tmin, tmax, ylo, yhi * 1.05, "t", "Regret(t) / log t")
    legend = []
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        idx = _thin(len(s.t))
        for values, dashed in ((s.mean_normalized, False), (s.worst_normalized, True)):
            pts = " ".join(f"{_f(c.sx(s.t[j]))},{_f(c.sy(values[j]))}" for j in idx)
            dash = ' stroke-dasharray="5,3"' if dashed else ""
            c.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        legend.append((f"N={s.n_arms}, d_y={s.d_y}", color, False))
    legend.append(("mean (solid)", "#000000", False))
    legend.append(("worst (dashed)", "#000000", True))
    c.legend(legend)
    return c.render()


def figure_final(rows: list[tuple], percentile_label: str = "p90", note: str = "") -> str:
    """Grouped bars of mean, percentile and worst regret at the final round per cell."""
    if not rows:
        raise SchemaError("no summary rows to plot")
    rows = sorted(rows)
    at_round = rows[0][2]
    yhi = max(r[4] for r in rows)
    yhi = yhi * 1.05 if yhi > 0 else 1.0
    c = _Canvas(f"Regret at T={at_round}", note)
    c.axes(0.0, float(len(rows)), 0.0, yhi, "(N, d_y)", "Regret(T)", xticks=False)
    colors = ("#1f77b4", "#ff7f0e", "#d62728")
    group = (c.x1 - c.x0) / len(rows)
    bar = group * 0.8 / 3
    for i, (n, d, _, mean, worst, upper) in enumerate(rows):
        gx = c.x0 + i * group + group * 0.1
        for j, v in enumerate((mean, upper, worst)):
            y = c.sy(max(v, 0.0))
            c.parts.append(
                f'<rect x="{_f(gx + j * bar)}" y="{_f(y)}" width="{_f(bar)}" height="{_f(c.y0 - y)}" fill="{colors[j]}"/>'
            )
        c.parts.append(
            f'<text x="{_f(gx + 1.5 * bar)}" y="{c.y0 + 15}" text-anchor="middle" font-family="sans-serif" font-size="10">{n},{d}</text>'
        )
    for k, (label, color) in enumerate((("Average", colors[0]), (percentile_label, colors[1]), ("Worst", colors[2]))):
        y = c.y1 + 12 + 16 * k
        c.parts.append(f'<rect x="{c.x1 + 14}" y="{y - 6}" width="12" height="12" fill="{color}"/>')
        c.parts.append(f'<text x="{c.x1 + 32}" y="{y + 4}" font-family="sans-serif" font-size="11">{label}</text>')
    return c.render()
