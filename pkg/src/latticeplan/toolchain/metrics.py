"""Path quality metrics computed from sampled motion traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..planner import PlanResult
from ..steering import angle_diff


@dataclass(frozen=True)
class MetricsReport:
    """Quality measures for one path.

    ``smoothness1`` sums squared second differences of the sampled positions;
    ``smoothness2`` integrates squared curvature over arc length, with the
    curvature estimated by finite-differencing the heading (so direction
    cusps register as high-curvature points).
    """

    arc_length: float
    smoothness1: float
    smoothness2: float
    max_curvature: float
    wall_time: float
    expansions: int

    def to_dict(self) -> dict:
        return {
            "arc_length": self.arc_length,
            "smoothness1": self.smoothness1,
            "smoothness2": self.smoothness2,
            "max_curvature": self.max_curvature,
            "wall_time": self.wall_time,
            "expansions": self.expansions,
        }


def metrics_for(result: PlanResult, wall_time: float = 0.0, expansions: int = 0) -> MetricsReport:
    trace = result.trace()
    positions = []
    headings = []
    for cfg in trace:
        if positions and abs(cfg.x - positions[-1][0]) < 1e-12 and abs(cfg.y - positions[-1][1]) < 1e-12:
            continue
        positions.append((cfg.x, cfg.y))
        headings.append(cfg.theta)

    arc_length = sum(e.motion.length for e in result.edges)

    deltas = [
        (bx - ax, by - ay)
        for (ax, ay), (bx, by) in zip(positions, positions[1:])
    ]
    smooth1 = sum(
        (dx2 - dx1) ** 2 + (dy2 - dy1) ** 2
        for (dx1, dy1), (dx2, dy2) in zip(deltas, deltas[1:])
    )

    smooth2 = 0.0
    max_curv = 0.0
    for k, (dx, dy) in enumerate(deltas):
        ds = math.hypot(dx, dy)
        if ds <= 1e-12:
            continue
        kappa = abs(angle_diff(headings[k + 1], headings[k])) / ds
        smooth2 += kappa * kappa * ds
        max_curv = max(max_curv, kappa)

    return MetricsReport(
        arc_length=arc_length,
        smoothness1=smooth1,
        smoothness2=smooth2,
        max_curvature=max_curv,
        wall_time=wall_time,
        expansions=expansions,
    )


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return format(v, ".12g")


def metrics_csv(planned: MetricsReport, smoothed: MetricsReport) -> str:
    """Two-column metric table with reproducible bytes.

    Wall-clock values are reported on stderr by the CLI instead of here so
    that reruns with a fixed seed emit identical files.
    """
    lines = [
        "# curvature estimated by finite differences of heading over arc length",
        "metric,planned,smoothed",
    ]
    pd, sd = planned.to_dict(), smoothed.to_dict()
    for key in ("arc_length", "smoothness1", "smoothness2", "max_curvature",
                "wall_time", "expansions"):
        lines.append(f"{key},{_fmt(pd[key])},{_fmt(sd[key])}")
    return "\n".join(lines) + "\n"
