"""Standalone SVG line charts built from sweep CSV text.

Plots read only the CSV of record so a figure can always be regenerated
from the table. Output is deterministic: coordinates are written with a
fixed number of decimals and no timestamps or ids are embedded.
"""
from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=55)


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = (lo // step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * span:
        if t >= lo - 1e-9 * span:
            ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:g}"


def sweep_svg(csv_text: str, title: str = "", y_column: str = "mean_correlation",
              err_column: str = "std_correlation") -> str:
    """Line chart of ``y_column`` (with +-``err_column`` bars) against column 0."""
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader)
    xi, yi, ei = 0, header.index(y_column), header.index(err_column)
    pts = [(float(r[xi]), float(r[yi]), float(r[ei])) for r in reader if r]
    if not pts:
        raise ValueError("no rows to plot")
    xs = [p[0] for p in pts]
    lows = [p[1] - p[2] for p in pts]
    highs = [p[1] + p[2] for p in pts]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    y0, y1 = min(lows), max(highs)
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{bottom}" x2="{_fmt(sx(t))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{bottom + 19}" text-anchor="middle">{_label(t)}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{_fmt(sy(t))}" x2="{left}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{_label(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(header[0])}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.2f})">{escape(y_column)}</text>')
    path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y, _ in pts)
    out.append(f'<polyline points="{path}" fill="none" stroke="#1f5fa8" stroke-width="2"/>')
    for x, y, e in pts:
        cx = _fmt(sx(x))
        out.append(f'<line x1="{cx}" y1="{_fmt(sy(y - e))}" x2="{cx}" y2="{_fmt(sy(y + e))}" stroke="#1f5fa8"/>')
        out.append(f'<circle cx="{cx}" cy="{_fmt(sy(y))}" r="3" fill="#1f5fa8"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
