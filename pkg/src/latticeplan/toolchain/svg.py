"""Static SVG rendering of scenarios, paths, and search debris."""

from __future__ import annotations

from ..planner import Scenario, _footprint_corners

import numpy as np


def _f(v: float) -> str:
    return format(v, ".4f")


def _polyline(points, stroke, width, dash=None) -> str:
    coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline fill="none" stroke="{stroke}" stroke-width="{_f(width)}"'
        f"{dash_attr} points=\"{coords}\" />"
    )


def _polygon(points, fill, stroke="none", opacity=1.0) -> str:
    coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
    return (
        f'<polygon fill="{fill}" stroke="{stroke}" fill-opacity="{_f(opacity)}"'
        f" points=\"{coords}\" />"
    )


def scene_svg(sc: Scenario, planned=None, smoothed=None, explored=None,
              sweep_stride: int = 8) -> str:
    """Scene drawing: world rectangle, obstacles, optional explored-tree
    segments, the footprint sweep along the smoothed path, and the planned and
    smoothed center lines in distinct strokes."""
    xmin, ymin, xmax, ymax = sc.bounds
    pad = 0.05 * max(xmax - xmin, ymax - ymin)
    view = (xmin - pad, ymin - pad, xmax - xmin + 2 * pad, ymax - ymin + 2 * pad)
    stroke_w = max(xmax - xmin, ymax - ymin) / 250.0

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_f(view[0])} {_f(-view[1] - view[3])} '
        f'{_f(view[2])} {_f(view[3])}" width="720" height="{_f(720 * view[3] / view[2])}">',
        '<g transform="scale(1,-1)">',
        f'<rect x="{_f(xmin)}" y="{_f(ymin)}" width="{_f(xmax - xmin)}" '
        f'height="{_f(ymax - ymin)}" fill="#fafafa" stroke="#444444" '
        f'stroke-width="{_f(stroke_w)}" />',
    ]

    for poly in sc.obstacles:
        parts.append(_polygon(poly.tolist(), "#8c8c8c", "#444444"))

    if explored:
        for (ax, ay), (bx, by) in explored:
            parts.append(
                f'<line x1="{_f(ax)}" y1="{_f(ay)}" x2="{_f(bx)}" y2="{_f(by)}" '
                f'stroke="#c9d8f0" stroke-width="{_f(stroke_w * 0.6)}" />'
            )

    if smoothed is not None:
        trace = smoothed.trace()
        xs = np.array([c.x for c in trace])
        ys = np.array([c.y for c in trace])
        ths = np.array([c.theta for c in trace])
        corners = _footprint_corners(sc.footprint, xs[::sweep_stride],
                                     ys[::sweep_stride], ths[::sweep_stride])
        for quad in corners:
            parts.append(_polygon(quad.tolist(), "#9fd1a6", opacity=0.25))

    if planned is not None:
        pts = [(c.x, c.y) for c in planned.trace()]
        parts.append(_polyline(pts, "#cc3333", stroke_w * 2.0, dash=f"{_f(stroke_w * 4)}"))
    if smoothed is not None:
        pts = [(c.x, c.y) for c in smoothed.trace()]
        parts.append(_polyline(pts, "#2255bb", stroke_w * 2.0))

    for cfg, color in ((sc.start, "#0a7d24"), (sc.goal, "#b01f6e")):
        parts.append(
            f'<circle cx="{_f(cfg.x)}" cy="{_f(cfg.y)}" r="{_f(stroke_w * 3)}" fill="{color}" />'
        )

    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
