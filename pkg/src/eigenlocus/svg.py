"""Self-contained SVG scatter plot with the traced boundary and borders.

Level-set polylines are drawn in pixel coordinates and also carry the traced
vertices in data coordinates, at full float precision, in ``data-vertices``.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

LEVEL_COLORS = {0.0: "black", 1.0: "red", -1.0: "blue"}
POINT_COLORS = {1.0: "#e8a0a0", -1.0: "#a0b4e8"}

WIDTH, HEIGHT = 640, 560
LEFT, RIGHT, TOP, BOTTOM = 60, 150, 20, 50


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def render(X, y, traces, extreme_points=None, title: str = "") -> str:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if not traces:
        raise ValueError("need at least one level-set trace for the frame bounds")
    x0, x1, y0, y1 = traces[0].bounds
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)

    def px(p):
        return LEFT + (p[..., 0] - x0) * sx, TOP + ph - (p[..., 1] - y0) * sy

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<defs><clipPath id="frame"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>'
           '</clipPath></defs>']
    if title:
        out.append(f'<text x="{LEFT}" y="{TOP - 6}">{escape(title)}</text>')

    # axes
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for t in _ticks(x0, x1):
        u = LEFT + (t - x0) * sx
        out.append(f'<line x1="{u:.2f}" y1="{TOP + ph}" x2="{u:.2f}" y2="{TOP + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{u:.2f}" y="{TOP + ph + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        v = TOP + ph - (t - y0) * sy
        out.append(f'<line x1="{LEFT - 4}" y1="{v:.2f}" x2="{LEFT}" y2="{v:.2f}" stroke="#444"/>')
        out.append(f'<text x="{LEFT - 6}" y="{v + 4:.2f}" text-anchor="end">{t:.3g}</text>')

    out.append('<g clip-path="url(#frame)">')
    u, v = px(X)
    for ui, vi, lab in zip(u, v, y):
        out.append(f'<circle cx="{ui:.2f}" cy="{vi:.2f}" r="2" fill="{POINT_COLORS[float(lab)]}"/>')
    if extreme_points is not None and len(extreme_points):
        u, v = px(np.atleast_2d(extreme_points))
        for ui, vi in zip(u, v):
            out.append(f'<circle cx="{ui:.2f}" cy="{vi:.2f}" r="4" fill="none" '
                       'stroke="black" stroke-width="0.6"/>')
    for tr in traces:
        color = LEVEL_COLORS.get(tr.level, "gray")
        for seg in tr.segments:
            u, v = px(seg)
            pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(u, v))
            exact = " ".join(f"{a!r},{b!r}" for a, b in seg.tolist())
            out.append(f'<polyline class="level" data-level="{tr.level:g}" points="{pts}" '
                       f'data-vertices="{exact}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    out.append("</g>")

    # legend
    lx, ly = WIDTH - RIGHT + 12, TOP + 10
    items = [("line", "black", "d(s) = 0"), ("line", "red", "d(s) = +1"),
             ("line", "blue", "d(s) = -1"), ("dot", POINT_COLORS[1.0], "class +1"),
             ("dot", POINT_COLORS[-1.0], "class -1"), ("ring", "black", "extreme point")]
    for k, (kind, color, label) in enumerate(items):
        yy = ly + 18 * k
        if kind == "line":
            out.append(f'<line x1="{lx}" y1="{yy}" x2="{lx + 18}" y2="{yy}" stroke="{color}" stroke-width="2"/>')
        elif kind == "dot":
            out.append(f'<circle cx="{lx + 9}" cy="{yy}" r="3" fill="{color}"/>')
        else:
            out.append(f'<circle cx="{lx + 9}" cy="{yy}" r="4" fill="none" stroke="{color}"/>')
        out.append(f'<text x="{lx + 24}" y="{yy + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_polylines(svg_text: str) -> list[tuple[float, np.ndarray]]:
    """(level, data-space vertices) for every level-set polyline in a rendered file."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    found = []
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        if el.get("class") != "level":
            continue
        pts = [tuple(map(float, p.split(","))) for p in el.get("data-vertices").split()]
        found.append((float(el.get("data-level")), np.array(pts)))
    return found
