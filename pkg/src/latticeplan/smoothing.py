"""Oscillation removal: shortest path in a DAG over ordered path waypoints.

The input path's edge endpoints, plus optionally ``n`` random configurations
sampled along it, become DAG vertices in traversal order.  Every ordered pair
is examined once: the cheaper of the forward connection and the penalized
reverse connection is tried first, the costlier one only if the cheaper
collides and the costlier could still improve.  Pairs that lie on a common
input edge can always fall back on that edge's own sub-motion, so the input
path is itself a solution and the result can never cost more.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field

from .planner import PlanEdge, PlanResult, Scenario, collision_free
from .steering import (
    Configuration,
    FORWARD,
    Motion,
    SteeringConfig,
    UnreachableConfigurationError,
    pose_on_motion,
    slice_motion,
    steer,
    steer_reverse,
)


@dataclass(frozen=True)
class Waypoint:
    cfg: Configuration
    position: float  # arc position along the whole path
    kind: str  # "vertex" | "sample"
    spans: tuple  # (edge index, traversal position within that edge)


@dataclass
class WaypointSequence:
    """Ordered DAG vertices with their relaxation state."""

    points: tuple[Waypoint, ...]
    dist: list[float] = field(default_factory=list)
    pred: list = field(default_factory=list)  # (index, Motion) or None

    def __post_init__(self):
        if not self.dist:
            self.dist = [math.inf] * len(self.points)
            self.pred = [None] * len(self.points)
            if self.points:
                self.dist[0] = 0.0


def sample_waypoints(edges, n: int, seed: int):
    """Edge endpoints plus ``n`` seeded uniform arc-length samples, ordered.

    ``edges`` is the input path's motion sequence.  Samples are drawn over the
    total unpenalized arc length and interleaved in traversal order.
    """
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    lengths = [m.length for m in edges]
    prefix = [0.0]
    for ln in lengths:
        prefix.append(prefix[-1] + ln)
    total = prefix[-1]

    points = []
    first = edges[0].start if edges else None
    if first is not None:
        points.append(Waypoint(first, 0.0, "vertex", ((0, 0.0),)))
    for k, m in enumerate(edges):
        spans = [(k, lengths[k])]
        if k + 1 < len(edges):
            spans.append((k + 1, 0.0))
        points.append(Waypoint(m.end, prefix[k + 1], "vertex", tuple(spans)))

    rng = random.Random(seed)
    draws = sorted(rng.uniform(0.0, total) for _ in range(n)) if total > 0 else []
    for pos in draws:
        k = min(bisect_right(prefix, pos) - 1, len(edges) - 1)
        local = pos - prefix[k]
        cfg = pose_on_motion(edges[k], local)
        points.append(Waypoint(cfg, pos, "sample", ((k, local),)))

    points.sort(key=lambda w: (w.position, w.kind == "sample"))
    return points


def _shared_edge(u: Waypoint, v: Waypoint):
    for ke, se in u.spans:
        for kf, sf in v.spans:
            if ke == kf and sf > se + 1e-12:
                return ke, se, sf
    return None


def dag_smooth(result: PlanResult, sc: Scenario, cfg: SteeringConfig,
               n: int = 0, seed: int = 0) -> PlanResult:
    """Rebuild a planned path as the minimum-cost chain over its waypoints.

    Output cost never exceeds the input cost, endpoints are unchanged, and
    every returned edge is collision-free.  ``n`` extra waypoints are sampled
    along the input trace with the given seed.
    """
    if not result.edges:
        return result

    edges = [e.motion for e in result.edges]
    seq = WaypointSequence(tuple(sample_waypoints(edges, n, seed)))
    points = seq.points
    dist, pred = seq.dist, seq.pred
    count = len(points)
    pair_evaluations = 0
    collision_checks = 0

    def relax(u, v, cost, motion, provenance):
        nd = dist[u] + cost
        if nd < dist[v] - 1e-15:
            dist[v] = nd
            pred[v] = (u, motion, provenance)

    for u in range(count - 1):
        if math.isinf(dist[u]):
            continue
        cu = points[u].cfg
        for v in range(u + 1, count):
            pair_evaluations += 1
            cv = points[v].cfg
            try:
                fwd = steer(cu, cv, cfg)
                rev = steer_reverse(cu, cv, cfg)
            except UnreachableConfigurationError:
                fwd = rev = None
            relaxed = False
            if fwd is not None:
                low, high = sorted((fwd, rev), key=lambda m: (m.cost, m.direction != FORWARD))
                if dist[u] + low.cost <= dist[v]:
                    collision_checks += 1
                    if collision_free(low, sc):
                        relax(u, v, low.cost, low, "shortcut")
                        relaxed = True
                    elif dist[u] + high.cost <= dist[v]:
                        collision_checks += 1
                        if collision_free(high, sc):
                            relax(u, v, high.cost, high, "shortcut")
                            relaxed = True
            if not relaxed:
                shared = _shared_edge(points[u], points[v])
                if shared is not None:
                    k, s0, s1 = shared
                    piece = slice_motion(edges[k], s0, s1, cfg)
                    # Sub-motions of an input edge stay on its collision-free sweep.
                    relax(u, v, piece.cost, piece, "kept")

    if math.isinf(dist[-1]):
        return result  # cannot happen with a connected input; keep the path

    chain = []
    node = count - 1
    while node != 0:
        u, motion, provenance = pred[node]
        chain.append((motion, provenance))
        node = u
    chain.reverse()

    out_edges = tuple(PlanEdge(m, prov) for m, prov in chain)
    stats = result.stats
    meta = dict(result.meta)
    meta.update({"smoothing_seed": seed, "smoothing_samples": n,
                 "pair_evaluations": pair_evaluations,
                 "smoothing_collision_checks": collision_checks})
    return PlanResult(
        edges=out_edges,
        cost=dist[-1],
        stats=stats,
        start=result.start,
        goal=result.goal,
        lam=result.lam,
        meta=meta,
    )
