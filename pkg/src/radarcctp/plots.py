"""Dependency-free SVG line plots of sweep results.

Output is a pure function of the rows passed in: no timestamps, fixed number
formatting, stable colour assignment by row order.
"""

from __future__ import annotations

from html import escape
from typing import Sequence

from .metrics import SweepRow

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_DASHES = ("", "6,3", "2,2", "8,2,2,2")

W, H = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 60, 200, 30, 50


def _x(i, n):
    return LEFT + (W - LEFT - RIGHT) * (i + 0.5) / n


def _xy(i, n, value, lo, hi):
    y = TOP + (H - TOP - BOTTOM) * (1 - (value - lo) / (hi - lo))
    return f"{_x(i, n):.2f},{y:.2f}"


def sweep_svg(rows: Sequence[SweepRow], metric: str, title: str | None = None) -> str:
    """Per-bin ``metric`` (``"prvm"`` or ``"rrim"``) for every row, one polyline each."""
    if metric not in ("prvm", "rrim"):
        raise ValueError("metric must be 'prvm' or 'rrim'")
    bins = rows[0].report.per_bin if rows else ()
    n = max(1, len(bins))
    values = [getattr(b, metric) for r in rows for b in r.report.per_bin]
    defined = [v for v in values if v is not None]
    lo = min(defined, default=0.0)
    lo = max(0.0, min(lo, 1.0) - 0.02)
    hi = 1.0
    if hi - lo < 1e-6:
        lo = hi - 0.1

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{LEFT}" y="18" font-size="13">{escape(title or metric.upper())}</text>']
    x0, x1 = LEFT, W - RIGHT
    y0, y1 = TOP, H - BOTTOM
    out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
               f'fill="none" stroke="black"/>')
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = y1 - (y1 - y0) * k / 4
        out.append(f'<line x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{y + 4:.2f}" text-anchor="end">{v:.3f}</text>')
    for i, b in enumerate(bins):
        out.append(f'<text x="{_x(i, n):.2f}" y="{y1 + 16}" text-anchor="middle">'
                   f'{b.start_m:g}-{b.end_m:g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{H - 10}" text-anchor="middle">range bin [m]</text>')

    for k, row in enumerate(rows):
        color = _PALETTE[k % len(_PALETTE)]
        dash = _DASHES[(k // len(_PALETTE)) % len(_DASHES)]
        style = f' stroke-dasharray="{dash}"' if dash else ""
        segment: list[str] = []
        segments = []
        for i, b in enumerate(row.report.per_bin):
            v = getattr(b, metric)
            if v is None:
                if segment:
                    segments.append(segment)
                segment = []
                continue
            segment.append(_xy(i, n, v, lo, hi))
        if segment:
            segments.append(segment)
        for seg in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{style} '
                       f'points="{" ".join(seg)}"/>')
        ly = TOP + 12 * k + 6
        out.append(f'<line x1="{x1 + 10}" y1="{ly}" x2="{x1 + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="1.5"{style}/>')
        out.append(f'<text x="{x1 + 35}" y="{ly + 4}">{escape(row.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
