"""Minimal SVG heatmaps with a diverging blue-white-red colour scale."""
from __future__ import annotations

from html import escape

import numpy as np

COOL = (59, 76, 192)
NEUTRAL = (247, 247, 247)
WARM = (180, 4, 38)


def diverging_color(value: float, center: float, spread: float) -> str:
    """Hex colour: warm above ``center``, cool below, neutral at it."""
    if not np.isfinite(value):
        return "#d9d9d9"
    t = 0.0 if spread <= 0 else max(-1.0, min(1.0, (value - center) / spread))
    end = WARM if t > 0 else COOL
    rgb = [round(n + abs(t) * (e - n)) for n, e in zip(NEUTRAL, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(rows: list, cols: list, values: np.ndarray, center: float, title: str = "",
                cell: int = 56) -> str:
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    spread = float(np.max(np.abs(finite - center))) if finite.size else 1.0
    left, top = 9 * max((len(r) for r in rows), default=4) + 12, 40 + (20 if title else 0)
    width, height = left + cell * len(cols) + 10, top + cell * len(rows) + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">'
    ]
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for j, c in enumerate(cols):
        x = left + cell * j + cell / 2
        out.append(f'<text x="{x:.0f}" y="{top - 8}" text-anchor="middle">{escape(c)}</text>')
    for i, r in enumerate(rows):
        y = top + cell * i
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4:.0f}" text-anchor="end">{escape(r)}</text>')
        for j in range(len(cols)):
            v = values[i, j]
            x = left + cell * j
            out.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{diverging_color(v, center, spread)}" stroke="#ffffff"/>'
            )
            label = f"{v:.2f}" if np.isfinite(v) else "-"
            out.append(
                f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" text-anchor="middle">{label}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
