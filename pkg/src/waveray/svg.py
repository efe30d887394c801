"""
Deterministic standalone SVG line plots.

The output depends only on the data: fixed canvas, linear axes, fixed
number formatting and no timestamps, so identical inputs give identical
bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=40, bottom=60)
MAX_POINTS = 2000
PALETTE = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: Optional[str] = None
    width: float = 1.5


@dataclass
class Figure:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    xlim: Optional[tuple] = None
    ylim: Optional[tuple] = None

    def add(self, x, y, label: str = "", color: Optional[str] = None, width: float = 1.5):
        self.series.append(Series(np.asarray(x, dtype=float), np.asarray(y, dtype=float), label, color, width))


def decimate(x, y, limit: int = MAX_POINTS):
    """Keep at most ``limit`` points: a uniform stride that always retains the last point."""
    n = len(x)
    if n <= limit:
        return np.asarray(x), np.asarray(y)
    stride = math.ceil((n - 1) / (limit - 1))
    keep = np.arange(0, n, stride)
    if keep[-1] != n - 1:
        keep = np.append(keep, n - 1)
    return np.asarray(x)[keep], np.asarray(y)[keep]


def nice_ticks(lo: float, hi: float, target: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks, step


def _fmt_tick(v: float, step: float) -> str:
    digits = max(0, -int(math.floor(math.log10(step))) + (1 if step / 10 ** math.floor(math.log10(step)) == 2.5 else 0))
    return f"{v:.{digits}f}"


def _limits(fig: Figure):
    xs = [s.x[np.isfinite(s.x) & np.isfinite(s.y)] for s in fig.series]
    ys = [s.y[np.isfinite(s.x) & np.isfinite(s.y)] for s in fig.series]
    xs = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ys = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    xlim = fig.xlim or (float(xs.min()), float(xs.max()))
    if fig.ylim:
        ylim = fig.ylim
    else:
        lo, hi = float(ys.min()), float(ys.max())
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        ylim = (lo - pad, hi + pad)
    if xlim[1] <= xlim[0]:
        xlim = (xlim[0] - 1.0, xlim[0] + 1.0)
    return xlim, ylim


def transform(fig: Figure):
    """Data-to-pixel maps ``(fx, fy)`` of ``fig``'s plotting area."""
    xlim, ylim = _limits(fig)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def fx(x):
        return x0 + (np.asarray(x, dtype=float) - xlim[0]) * (x1 - x0) / (xlim[1] - xlim[0])

    def fy(y):
        return y0 + (np.asarray(y, dtype=float) - ylim[0]) * (y1 - y0) / (ylim[1] - ylim[0])

    return fx, fy, xlim, ylim


def _split_finite(x, y):
    ok = np.isfinite(x) & np.isfinite(y)
    runs, start = [], None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(ok)))
    return [(x[a:b], y[a:b]) for a, b in runs if b - a >= 2]


def render(fig: Figure) -> str:
    fx, fy, xlim, ylim = transform(fig)
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(fig.title)}</text>',
        f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}"/></clipPath>',
    ]
    xt, xs = nice_ticks(*xlim)
    yt, ys = nice_ticks(*ylim)
    for t in xt:
        px = float(fx(t))
        out.append(f'<line x1="{px:.2f}" y1="{bottom}" x2="{px:.2f}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{bottom + 20}" text-anchor="middle">{_fmt_tick(t, xs)}</text>')
    for t in yt:
        py = float(fy(t))
        out.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end">{_fmt_tick(t, ys)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="black"/>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    out.append(
        f'<text x="20" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {(top + bottom) / 2:.1f})">{escape(fig.ylabel)}</text>'
    )
    out.append('<g clip-path="url(#plot)" fill="none">')
    for k, s in enumerate(fig.series):
        color = s.color or PALETTE[k % len(PALETTE)]
        for xr, yr in _split_finite(s.x, s.y):
            xd, yd = decimate(xr, yr)
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(fx(xd), fy(yd)))
            out.append(f'<polyline stroke="{color}" stroke-width="{s.width:g}" points="{pts}"/>')
    out.append("</g>")
    labelled = [(k, s) for k, s in enumerate(fig.series) if s.label]
    for row, (k, s) in enumerate(labelled):
        color = s.color or PALETTE[k % len(PALETTE)]
        y = top + 18 + 18 * row
        out.append(f'<line x1="{right - 150}" y1="{y - 4}" x2="{right - 125}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right - 118}" y="{y}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_polylines(svg_text: str) -> list:
    """Pixel coordinates of every polyline in an SVG produced by :func:`render`."""
    import re

    out = []
    for m in re.finditer(r'<polyline [^>]*points="([^"]*)"', svg_text):
        pts = [tuple(map(float, p.split(","))) for p in m.group(1).split()]
        out.append(np.array(pts))
    return out


def profile_figure(profiles: Sequence, labels: Sequence[str], span: float, kind: str, n: int = 601) -> Figure:
    """Launch amplitude (``kind="profiles"``) or launch G (``kind="launchG"``) curves on ``[-span, span]``."""
    from waveray.profiles import eval_G0, eval_R

    xi = np.linspace(-span, span, n)
    if kind == "profiles":
        fig = Figure("Launch amplitude R(xi, 0)", "xi", "R")
        for p, lab in zip(profiles, labels):
            fig.add(xi, eval_R(p, xi), lab)
    elif kind == "launchG":
        fig = Figure("Launch wave potential G(xi, 0)", "xi", "G")
        for p, lab in zip(profiles, labels):
            fig.add(xi, eval_G0(p, xi), lab)
    else:
        raise ValueError(f"unknown profile figure kind {kind!r}")
    return fig
