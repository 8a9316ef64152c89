"""Tiny SVG line-plot writer with a logarithmic horizontal axis."""

from __future__ import annotations

import math
from typing import Sequence

WIDTH, HEIGHT = 640, 400
MARGIN = 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot(r: Sequence[float], values: Sequence[float], title: str, ylabel: str) -> str:
    """Render (r, value) pairs; non-finite values and r <= 0 are skipped."""
    pts = [(math.log10(a), b) for a, b in zip(r, values)
           if a > 0 and b is not None and math.isfinite(a) and math.isfinite(b)]
    pts.sort()
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16">{title}</text>']
    x0, x1, y0, y1 = MARGIN, WIDTH - 20, HEIGHT - MARGIN, 40
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    out.append(f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="13">log10 r</text>')
    out.append(f'<text x="15" y="{(y0 + y1) // 2}" font-size="13" '
               f'transform="rotate(-90 15 {(y0 + y1) // 2})" text-anchor="middle">{ylabel}</text>')
    if pts:
        lx = [p[0] for p in pts]
        ly = [p[1] for p in pts]
        xa, xb = min(lx), max(lx)
        ya, yb = min(ly), max(ly)
        if xb == xa:
            xa, xb = xa - 0.5, xb + 0.5
        if yb == ya:
            pad = abs(ya) * 0.05 or 1.0
            ya, yb = ya - pad, yb + pad

        def sx(v):
            return x0 + (v - xa) / (xb - xa) * (x1 - x0)

        def sy(v):
            return y0 - (v - ya) / (yb - ya) * (y0 - y1)

        for t in _ticks(xa, xb):
            out.append(f'<text x="{_fmt(sx(t))}" y="{y0 + 18}" text-anchor="middle" '
                       f'font-size="11">{t:.2f}</text>')
        for t in _ticks(ya, yb):
            out.append(f'<text x="{x0 - 6}" y="{_fmt(sy(t) + 4)}" text-anchor="end" '
                       f'font-size="11">{t:.4g}</text>')
        path = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="2"/>')
    else:
        out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" text-anchor="middle">no finite data'
                   '</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
