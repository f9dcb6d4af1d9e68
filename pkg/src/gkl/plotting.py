"""Minimal self-contained log-log SVG plots."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "NoPlottablePoints", "emit_plot"]

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 190, 30, 60
PALETTE = ["#0072bd", "#d95319", "#edb120", "#7e2f8e", "#77ac30",
           "#4dbeee", "#a2142f", "#ff00bf", "#000000", "#808080"]


class NoPlottablePoints(ValueError):
    pass


@dataclass
class Series:
    label: str
    ns: Sequence[float]
    values: Sequence[float]


def _decades(lo: float, hi: float) -> list[float]:
    return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]


def emit_plot(series: Sequence, references: Sequence = (), path=None,
              title: str = "", ylabel: str = "") -> tuple[str, int]:
    """Render series on log-log axes, with dashed reference lines of given slopes.

    ``series`` holds :class:`Series` or ``(label, ns, values)`` tuples and
    ``references`` holds ``(label, slope)`` pairs.  Points with a
    nonpositive coordinate are dropped.  Returns the SVG text and the number
    of dropped points.
    """
    cleaned = []
    dropped = 0
    for s in series:
        label, ns, values = (s.label, s.ns, s.values) if isinstance(s, Series) else s
        ns = np.asarray(ns, dtype=float)
        values = np.asarray(values, dtype=float)
        ok = (ns > 0) & (values > 0) & np.isfinite(values) & np.isfinite(ns)
        dropped += int((~ok).sum())
        if ok.any():
            cleaned.append((label, np.log10(ns[ok]), np.log10(values[ok])))
    if dropped:
        log.warning("dropped %d nonpositive points from the plot", dropped)
    if not cleaned:
        raise NoPlottablePoints("nothing to plot on log-log axes")

    xs = np.concatenate([c[1] for c in cleaned])
    ys = np.concatenate([c[2] for c in cleaned])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.03 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<defs><clipPath id="plotarea"><rect x="{MARGIN_L}" y="{MARGIN_T}" '
        f'width="{pw}" height="{ph}"/></clipPath></defs>',
    ]
    for t in _decades(x0, x1):
        e = math.log10(t)
        if x0 - 1e-9 <= e <= x1 + 1e-9:
            out.append(f'<line x1="{px(e):.2f}" y1="{MARGIN_T}" x2="{px(e):.2f}" '
                       f'y2="{MARGIN_T + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{px(e):.2f}" y="{MARGIN_T + ph + 18}" '
                       f'text-anchor="middle">1e{round(e)}</text>')
    for t in _decades(y0, y1):
        e = math.log10(t)
        if y0 - 1e-9 <= e <= y1 + 1e-9:
            out.append(f'<line x1="{MARGIN_L}" y1="{py(e):.2f}" x2="{MARGIN_L + pw}" '
                       f'y2="{py(e):.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{MARGIN_L - 6}" y="{py(e) + 4:.2f}" '
                       f'text-anchor="end">1e{round(e)}</text>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">n</text>')
    if ylabel:
        out.append(f'<text x="18" y="{MARGIN_T + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {MARGIN_T + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{MARGIN_L + pw / 2}" y="{MARGIN_T - 10}" '
                   f'text-anchor="middle">{escape(title)}</text>')

    legend_y = MARGIN_T + 10
    lx = MARGIN_L + pw + 15
    for i, (label, lxs, lys) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(lxs, lys))
        out.append(f'<polyline clip-path="url(#plotarea)" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts}"/>')
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 20}" y2="{legend_y}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{legend_y + 4}">{escape(str(label))}</text>')
        legend_y += 18

    # reference lines start at the top-left data point and keep their slope
    anchor_y = max(c[2][0] for c in cleaned)
    for ref in references:
        label, slope = ref if isinstance(ref, tuple) else (f"n^{ref:g}", ref)
        ya = anchor_y
        yb = anchor_y + slope * (x1 - x0)
        out.append(f'<line clip-path="url(#plotarea)" x1="{px(x0):.2f}" y1="{py(ya):.2f}" '
                   f'x2="{px(x1):.2f}" y2="{py(yb):.2f}" stroke="black" '
                   f'stroke-dasharray="6,4" stroke-width="1"/>')
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 20}" y2="{legend_y}" '
                   f'stroke="black" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{lx + 26}" y="{legend_y + 4}">{escape(str(label))}</text>')
        legend_y += 18
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text, dropped
