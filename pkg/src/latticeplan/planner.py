"""Online planning: collision checking and bidirectional primitive A*.

The search runs two trees, one rooted at the start and one grown backwards
from the goal, expanding them alternately over the control-set actions of
each vertex's relative start.  Each side orders expansions by the weighted
score a*g + b*h with a = 0.5*lambda and b = 1 - 0.5*lambda, where h measures
down to the opposite frontier.  With lambda = 1 and on-lattice endpoints the
returned cost equals the shortest path in the collision-free control-set
graph: connections then only form at shared vertices, and the search stops
once both frontiers' admissible bounds meet the incumbent.  With lambda < 1
a direct steering connection toward the best opposite-frontier node is tried
at every expansion and the first successful connection ends the search.

Off-lattice start and goal configurations are served by a precomputed
tolerance-grid control set: entry motions connect a grid configuration near
the start into the lattice, and the same motions traversed in reverse bring
lattice vertices to a grid configuration near the goal.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .lattice import Lattice, OffLatticeError, lattice_hash
from .mtscs import ControlSet, _ROT_XY
from .steering import (
    Configuration,
    FORWARD,
    Motion,
    REVERSE,
    SteeringConfig,
    UnreachableConfigurationError,
    _assemble_motion,
    angle_diff,
    config_from_list,
    euclidean,
    reverse_cost,
    steer,
    steer_reverse,
    transform_endpoint,
    transform_motion,
)

START_NODE = -1  # virtual node for an off-lattice start
GOAL_NODE = -2  # virtual node for an off-lattice goal


class PlannerError(Exception):
    pass


class ScenarioError(PlannerError):
    """Scenario violates its own invariants (collision at an endpoint,
    degenerate obstacle, endpoint outside the world)."""


class NoPathError(PlannerError):
    """Search exhausted its frontiers or budget without connecting."""

    def __init__(self, stats):
        self.stats = stats
        super().__init__("no collision-free path found")


@dataclass(frozen=True)
class Footprint:
    """Vehicle rectangle, referenced at the rear axle: the body spans
    [-rear_offset, length - rear_offset] along the heading and +-width/2
    across it."""

    length: float
    width: float
    rear_offset: float = 0.0

    def to_dict(self) -> dict:
        return {"length": self.length, "width": self.width, "rear_offset": self.rear_offset}

    @staticmethod
    def from_dict(d: dict) -> "Footprint":
        return Footprint(float(d["length"]), float(d["width"]), float(d.get("rear_offset", 0.0)))


def _validate_polygon(poly: np.ndarray) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ScenarioError("obstacle polygons need at least three (x, y) vertices")
    edges = np.roll(poly, -1, axis=0) - poly
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    if np.all(np.abs(cross) < 1e-12):
        raise ScenarioError("degenerate obstacle polygon")
    if np.any(cross > 1e-12) and np.any(cross < -1e-12):
        raise ScenarioError("obstacle polygon is not convex")
    return poly


@dataclass
class Scenario:
    """World rectangle, convex obstacles, vehicle footprint, and the query."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    obstacles: tuple
    footprint: Footprint
    start: Configuration
    goal: Configuration
    tolerances: tuple[float, ...] = ()
    lam: float = 1.0

    def __post_init__(self):
        self.obstacles = tuple(_validate_polygon(p) for p in self.obstacles)
        if not 0.0 <= self.lam <= 1.0:
            raise ScenarioError("lambda must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "obstacles": [p.tolist() for p in self.obstacles],
            "footprint": self.footprint.to_dict(),
            "start": self.start.as_list(),
            "goal": self.goal.as_list(),
            "tolerances": list(self.tolerances),
            "lambda": self.lam,
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        return Scenario(
            bounds=tuple(float(v) for v in d["bounds"]),
            obstacles=tuple(np.asarray(p, dtype=float) for p in d.get("obstacles", [])),
            footprint=Footprint.from_dict(d["footprint"]),
            start=config_from_list(d["start"]),
            goal=config_from_list(d["goal"]),
            tolerances=tuple(float(v) for v in d.get("tolerances", [])),
            lam=float(d.get("lambda", 1.0)),
        )


# ---------------------------------------------------------------------------
# Collision checking (separating-axis test, vectorized over a motion trace)
# ---------------------------------------------------------------------------

def _footprint_corners(fp: Footprint, xs, ys, thetas):
    bx = np.array([-fp.rear_offset, fp.length - fp.rear_offset,
                   fp.length - fp.rear_offset, -fp.rear_offset])
    by = np.array([-fp.width / 2.0, -fp.width / 2.0, fp.width / 2.0, fp.width / 2.0])
    c, s = np.cos(thetas), np.sin(thetas)
    x = xs[:, None] + c[:, None] * bx[None, :] - s[:, None] * by[None, :]
    y = ys[:, None] + s[:, None] * bx[None, :] + c[:, None] * by[None, :]
    return np.stack([x, y], axis=2)  # (N, 4, 2)


def _sweep_hits_polygon(corners, poly):
    """Per-sample collision flags for a swept footprint against one convex
    polygon; a sample collides when no axis from either shape separates."""
    edges = np.roll(poly, -1, axis=0) - poly
    oaxes = np.stack([-edges[:, 1], edges[:, 0]], axis=1)  # (A, 2)
    proj_c = np.einsum("nkj,aj->ank", corners, oaxes)  # (A, N, 4)
    cmin, cmax = proj_c.min(axis=2), proj_c.max(axis=2)
    proj_o = poly @ oaxes.T  # (M, A)
    omin, omax = proj_o.min(axis=0), proj_o.max(axis=0)
    separated = ((cmax < omin[:, None]) | (cmin > omax[:, None])).any(axis=0)

    e0 = corners[:, 1] - corners[:, 0]
    e1 = corners[:, 2] - corners[:, 1]
    faxes = np.stack(
        [np.stack([-e0[:, 1], e0[:, 0]], axis=1), np.stack([-e1[:, 1], e1[:, 0]], axis=1)],
        axis=1,
    )  # (N, 2, 2)
    proj_fc = np.einsum("nkj,naj->nak", corners, faxes)  # (N, 2, 4)
    proj_fo = np.einsum("mj,naj->nam", poly, faxes)  # (N, 2, M)
    sep_fp = (proj_fc.max(2) < proj_fo.min(2)) | (proj_fc.min(2) > proj_fo.max(2))
    separated |= sep_fp.any(axis=1)
    return ~separated


def _trace_arrays(m: Motion):
    xs = np.fromiter((c.x for c in m.trace), dtype=float, count=len(m.trace))
    ys = np.fromiter((c.y for c in m.trace), dtype=float, count=len(m.trace))
    ths = np.fromiter((c.theta for c in m.trace), dtype=float, count=len(m.trace))
    return xs, ys, ths


def collision_free(m: Motion, sc: Scenario) -> bool:
    """True iff the footprint posed at every trace sample stays inside the
    world rectangle and intersects no obstacle."""
    xs, ys, ths = _trace_arrays(m)
    corners = _footprint_corners(sc.footprint, xs, ys, ths)
    xmin, ymin, xmax, ymax = sc.bounds
    if (corners[:, :, 0] < xmin).any() or (corners[:, :, 0] > xmax).any():
        return False
    if (corners[:, :, 1] < ymin).any() or (corners[:, :, 1] > ymax).any():
        return False
    for poly in sc.obstacles:
        if _sweep_hits_polygon(corners, poly).any():
            return False
    return True


def pose_collision_free(cfg: Configuration, sc: Scenario) -> bool:
    xs = np.array([cfg.x])
    ys = np.array([cfg.y])
    ths = np.array([cfg.theta])
    corners = _footprint_corners(sc.footprint, xs, ys, ths)
    xmin, ymin, xmax, ymax = sc.bounds
    if (corners[:, :, 0] < xmin).any() or (corners[:, :, 0] > xmax).any():
        return False
    if (corners[:, :, 1] < ymin).any() or (corners[:, :, 1] > ymax).any():
        return False
    return not any(_sweep_hits_polygon(corners, poly).any() for poly in sc.obstacles)


# ---------------------------------------------------------------------------
# Off-lattice tolerance grid
# ---------------------------------------------------------------------------

def _round_half_down(z: float) -> int:
    """Nearest integer with .5 ties resolved toward the smaller value."""
    return math.ceil(z - 0.5)


def round_to_lattice(v: Configuration, lat: Lattice) -> int:
    """Vertex id with every state rounded to its nearest sample (ties toward
    the smaller value).  Raises ``OffLatticeError`` outside the extent."""
    spec = lat.spec
    ix = _round_half_down(v.x / spec.alpha)
    iy = _round_half_down(v.y / spec.beta)
    if abs(ix) > spec.n0 or abs(iy) > spec.n1:
        raise OffLatticeError(f"({v.x}, {v.y}) rounds outside the lattice extent")
    ih = _round_half_down(v.theta / spec.heading_step) % spec.num_headings
    if len(v.higher) != len(spec.state_samples):
        raise OffLatticeError("higher-order state count mismatch")
    states = []
    for u, grid in zip(v.higher, spec.state_samples):
        if grid.count == 1:
            if abs(u - grid.lo) > 1e-6:
                raise OffLatticeError("state outside its sampled range")
            states.append(0)
            continue
        step = (grid.hi - grid.lo) / (grid.count - 1)
        k = _round_half_down((u - grid.lo) / step)
        if k < 0 or k > grid.count - 1:
            raise OffLatticeError("state outside its sampled range")
        states.append(k)
    vid = lat.id_at_key((ix, iy, ih, *states), include_pruned=True)
    if vid is None:
        raise OffLatticeError("rounded configuration is not a lattice vertex")
    return vid


@dataclass
class OffLatticeSet:
    """Tolerance-grid control set: per canonical grid cell, one motion per
    control-set primitive connecting the cell configuration to a nearby
    lattice vertex."""

    tolerances: tuple[float, ...]
    counts: tuple[int, ...]
    cells: dict
    lattice_hash: str = ""

    def cell_count(self) -> int:
        return len(self.cells)

    def match(self, v: Configuration, lat: Lattice):
        """Cell key, and v's configuration snapped onto that cell's grid point
        translated into v's own lattice cell.  Every snapped state is within
        its tolerance of v's."""
        spec = lat.spec
        xt, yt, tht = self.tolerances[0], self.tolerances[1], self.tolerances[2]
        nx, ny, nth = self.counts[0], self.counts[1], self.counts[2]

        base_x = math.floor(v.x / spec.alpha) * spec.alpha
        kx = round((v.x - base_x) / (2.0 * xt))
        if kx >= nx:
            kx = 0
            base_x += spec.alpha
        base_y = math.floor(v.y / spec.beta) * spec.beta
        ky = round((v.y - base_y) / (2.0 * yt))
        if ky >= ny:
            ky = 0
            base_y += spec.beta
        kth = round(v.theta / (2.0 * tht))
        if kth >= nth:
            kth = 0

        states = []
        svals = []
        for u, grid, tol, count in zip(
            v.higher, spec.state_samples, self.tolerances[3:], self.counts[3:]
        ):
            ku = min(max(round((u - grid.lo) / (2.0 * tol)), 0), count - 1)
            states.append(ku)
            svals.append(grid.lo + 2.0 * tol * ku)
        snapped = Configuration(
            base_x + 2.0 * xt * kx, base_y + 2.0 * yt * ky, 2.0 * tht * kth, tuple(svals)
        )
        if abs(angle_diff(snapped.theta, v.theta)) > tht + 1e-9:
            raise OffLatticeError("heading outside grid coverage")
        return (kx, ky, kth, *states), snapped


def build_offlattice_set(lat: Lattice, cs: ControlSet, tol, cfg: SteeringConfig,
                         steer_fn=steer) -> OffLatticeSet:
    """Precompute entry motions from every tolerance-grid configuration.

    The grid covers one lattice cell in x and y (translation reaches the
    rest), the full heading circle, and each higher state's range, all at
    spacing twice the per-state tolerance.  For every grid configuration q
    and every primitive available at its rounded vertex's relative start, the
    primitive endpoint and its three loop-avoiding shifted copies are tried
    and the arc-length-minimal steerable candidate is kept.
    """
    spec = lat.spec
    tol = tuple(float(v) for v in tol)
    if len(tol) != 3 + len(spec.state_samples):
        raise ValueError("need one tolerance per state")
    if tol[0] <= 0 or tol[1] <= 0 or tol[2] <= 0 or any(v <= 0 for v in tol[3:]):
        raise ValueError("tolerances must be positive")
    if tol[0] > spec.alpha / 2 or tol[1] > spec.beta / 2 or tol[2] > spec.heading_step / 2:
        raise ValueError("tolerances must not exceed half the lattice spacing")

    nx = math.ceil(spec.alpha / (2.0 * tol[0]))
    ny = math.ceil(spec.beta / (2.0 * tol[1]))
    nth = math.ceil(math.pi / tol[2])
    counts = [nx, ny, nth]
    for grid, ut in zip(spec.state_samples, tol[3:]):
        if grid.count == 1 or grid.hi == grid.lo:
            counts.append(1)
        else:
            counts.append(math.ceil((grid.hi - grid.lo) / (2.0 * ut)) + 1)

    cells = {}
    state_ranges = [range(c) for c in counts[3:]]
    for kx in range(nx):
        for ky in range(ny):
            for kth in range(nth):
                for states in itertools.product(*state_ranges):
                    svals = tuple(
                        grid.lo + 2.0 * ut * k
                        for grid, ut, k in zip(spec.state_samples, tol[3:], states)
                    )
                    q = Configuration(2.0 * tol[0] * kx, 2.0 * tol[1] * ky,
                                      2.0 * tol[2] * kth, svals)
                    key = (kx, ky, kth, *states)
                    cells[key] = tuple(_cell_motions(q, lat, cs, cfg, steer_fn))
    return OffLatticeSet(tol, tuple(counts), cells, lattice_hash(lat))


def _cell_motions(q: Configuration, lat: Lattice, cs: ControlSet,
                  cfg: SteeringConfig, steer_fn):
    try:
        nearest = round_to_lattice(q, lat)
    except OffLatticeError:
        return
    sid = lat.relative_start_id(nearest)
    anchor = lat.vertex(nearest)
    for p in cs.motions(sid):
        end = transform_endpoint(p, anchor)
        cands = {(end.x, end.y)}
        sx = _sign(end.x - q.x)
        sy = _sign(end.y - q.y)
        for cx in {end.x, end.x + sx * lat.spec.alpha}:
            for cy in {end.y, end.y + sy * lat.spec.beta}:
                cands.add((cx, cy))
        best = None
        for cx, cy in sorted(cands):
            target = Configuration(cx, cy, end.theta, end.higher)
            if lat.id_of(target) is None:
                continue
            try:
                if p.direction == REVERSE:
                    motion = steer_reverse(q, target, cfg)
                else:
                    motion = steer_fn(q, target, cfg)
            except UnreachableConfigurationError:
                continue
            if best is None or motion.length < best.length - 1e-12:
                best = motion
        if best is not None:
            yield best


def _sign(v: float) -> float:
    if v > 1e-12:
        return 1.0
    if v < -1e-12:
        return -1.0
    return 0.0


def _reverse_traversal(m: Motion, cfg: SteeringConfig) -> Motion:
    """The same geometry driven the other way: forward motions become
    penalized reverse motions and vice versa."""
    if m.direction == FORWARD:
        return _assemble_motion(m.end, m.start, reverse_cost(m.length, cfg),
                                REVERSE, m.segments, cfg)
    return _assemble_motion(m.end, m.start, m.length, FORWARD, m.segments, cfg)


# ---------------------------------------------------------------------------
# PrAC search
# ---------------------------------------------------------------------------

class SearchNode(NamedTuple):
    """Open-list entry for one tree of the bidirectional search.

    ``f_prime`` is the weighted score a*g + b*h; entries order by it with the
    cost-to-come and vertex id as deterministic tie-breakers.  Which tree the
    node belongs to is determined by the heap holding it, and its parent edge
    lives in that tree's parent map.
    """

    f_prime: float
    g: float
    vertex: int


def weighted_score(lam: float, g: float, h: float) -> float:
    """Expansion priority a*g + b*h with a = 0.5*lam and b = 1 - 0.5*lam.

    lam = 1 weighs cost-to-come and heuristic equally (plain A* order);
    smaller values push the search toward the heuristic.
    """
    return 0.5 * lam * g + (1.0 - 0.5 * lam) * h


@dataclass(frozen=True)
class PlanEdge:
    motion: Motion
    provenance: str  # primitive | reverse-primitive | direct-connect | entry | exit

    def to_dict(self) -> dict:
        return {"provenance": self.provenance, **self.motion.to_dict()}


@dataclass
class PlanStats:
    expansions: int = 0
    collision_checks: int = 0
    wall_time: float = 0.0
    incumbent_trace: tuple = ()
    explored_edges: tuple = ()

    def to_dict(self) -> dict:
        return {
            "expansions": self.expansions,
            "collision_checks": self.collision_checks,
            "wall_time": self.wall_time,
            "incumbent_trace": list(self.incumbent_trace),
        }


@dataclass
class PlanResult:
    edges: tuple[PlanEdge, ...]
    cost: float
    stats: PlanStats
    start: Configuration
    goal: Configuration
    lam: float = 1.0
    meta: dict = field(default_factory=dict)

    def trace(self):
        """Concatenated configurations along the path, junctions deduplicated."""
        out = []
        for edge in self.edges:
            pts = edge.motion.trace
            if out and pts and out[-1].almost_equal(pts[0], 1e-9):
                pts = pts[1:]
            out.extend(pts)
        if not out:
            out = [self.start]
        return out

    def to_dict(self) -> dict:
        return {
            "edges": [e.to_dict() for e in self.edges],
            "cost": self.cost,
            "stats": self.stats.to_dict(),
            "start": self.start.as_list(),
            "goal": self.goal.as_list(),
            "lambda": self.lam,
            "meta": dict(self.meta),
        }


def plan_result_from_dict(d: dict, cfg: SteeringConfig) -> PlanResult:
    from .steering import motion_from_dict

    edges = tuple(
        PlanEdge(motion_from_dict(e, cfg), e.get("provenance", "primitive"))
        for e in d.get("edges", [])
    )
    stats = PlanStats(
        expansions=int(d.get("stats", {}).get("expansions", 0)),
        collision_checks=int(d.get("stats", {}).get("collision_checks", 0)),
        wall_time=float(d.get("stats", {}).get("wall_time", 0.0)),
    )
    return PlanResult(
        edges=edges,
        cost=float(d["cost"]),
        stats=stats,
        start=config_from_list(d["start"]),
        goal=config_from_list(d["goal"]),
        lam=float(d.get("lambda", 1.0)),
        meta=dict(d.get("meta", {})),
    )


class _Search:
    """State shared by the two trees of one planning query."""

    def __init__(self, sc, cs, lat, cfg, off, heuristic, expansion_limit):
        import heapq

        self.heapq = heapq
        self.sc = sc
        self.cs = cs
        self.lat = lat
        self.cfg = cfg
        self.off = off
        self.h = heuristic or (lambda a, b: euclidean(a, b))
        self.limit = expansion_limit
        self.lam = sc.lam
        self.stats = PlanStats()
        self._collision_cache: dict = {}
        self._motions_by_class: dict = {}

        self.g = {0: {}, 1: {}}  # side 0 = forward, 1 = backward
        self.parent = {0: {}, 1: {}}
        self._explored = []  # (from xy, to xy) pairs for debug rendering
        self.open_heap = {0: [], 1: []}
        self.open_g = {0: {}, 1: {}}
        self.best_cost = math.inf
        self.best_join = None  # ("vertex", node) | ("connect", i, j, edge)
        self.incumbents = []

        self.node_cfg = {}
        self.entry_edges = []
        self.exit_edges = []

    # -- node bookkeeping --------------------------------------------------

    def cfg_of(self, node):
        return self.node_cfg[node]

    def _push(self, side, node, g):
        h_static = self.h(self.cfg_of(node), self.node_cfg[GOAL_NODE if side == 0 else START_NODE])
        h_dyn = self._frontier_heuristic(side, node, h_static)
        entry = SearchNode(weighted_score(self.lam, g, h_dyn), g, node)
        self.heapq.heappush(self.open_heap[side], entry)
        self.open_g[side][node] = g

    def _frontier_heuristic(self, side, node, fallback):
        opposite = self.open_g[1 - side]
        if not opposite:
            return fallback
        cfg = self.cfg_of(node)
        return min(self.h(cfg, self.cfg_of(n)) + g for n, g in opposite.items())

    def _relax(self, side, node, g, parent_node, edge):
        cur = self.g[side].get(node)
        if cur is not None and g >= cur - 1e-15:
            return False
        self.g[side][node] = g
        self.parent[side][node] = (parent_node, edge)
        self._explored.append(
            (self.cfg_of(parent_node).position, self.cfg_of(node).position)
        )
        self._push(side, node, g)
        other = self.g[1 - side].get(node)
        if other is not None:
            self._offer(g + other, ("vertex", node))
        return True

    def _offer(self, cost, join):
        if cost < self.best_cost - 1e-15:
            self.best_cost = cost
            self.best_join = join
            self.incumbents.append(cost)

    # -- edges ---------------------------------------------------------------

    def _edge_free(self, key, motion):
        cached = self._collision_cache.get(key)
        if cached is None:
            self.stats.collision_checks += 1
            cached = collision_free(motion, self.sc)
            self._collision_cache[key] = cached
        return cached

    def _class_motions(self, sid):
        out = self._motions_by_class.get(sid)
        if out is None:
            out = []
            for vid, m in sorted(self.cs.per_start.get(sid, {}).items()):
                out.append(((sid, vid, m.direction), m, "primitive"))
            for vid, m in sorted(self.cs.reverse.get(sid, {}).items()):
                out.append(((sid, vid, m.direction), m, "reverse-primitive"))
            self._motions_by_class[sid] = out
        return out

    def successors(self, node):
        if node == START_NODE:
            return self.entry_edges
        cached = self.cs.transform_cache.get(("succ", node))
        if cached is None:
            cached = []
            sid = self.lat.relative_start_id(node)
            at = self.lat.vertex(node)
            for mkey, m, prov in self._class_motions(sid):
                head = self.lat.id_of(transform_endpoint(m, at))
                if head is None:
                    continue
                cached.append((head, transform_motion(m, at), prov, ("e", node, mkey)))
            self.cs.transform_cache[("succ", node)] = cached
        return cached

    def predecessors(self, node):
        if node == GOAL_NODE:
            return self.exit_edges
        cached = self.cs.transform_cache.get(("pred", node))
        if cached is None:
            cached = []
            lat = self.lat
            spec = lat.spec
            jkey = lat.key(node)
            for sid in lat.start_ids:
                skey = lat.key(sid)
                for mkey, m, prov in self._class_motions(sid):
                    ekey = lat.key_of(m.end)
                    if ekey is None or ekey[3:] != jkey[3:]:
                        continue
                    ih_i = (jkey[2] - ekey[2] + skey[2]) % spec.num_headings
                    if ih_i % spec.quadrant_headings != skey[2]:
                        continue
                    turns = ((ih_i - skey[2]) % spec.num_headings) // spec.quadrant_headings
                    rx, ry = _ROT_XY[turns](m.end.x, m.end.y)
                    px = jkey[0] * spec.alpha - rx
                    py = jkey[1] * spec.beta - ry
                    ix = round(px / spec.alpha)
                    if abs(px - ix * spec.alpha) > 1e-6 or abs(ix) > spec.n0:
                        continue
                    iy = round(py / spec.beta)
                    if abs(py - iy * spec.beta) > 1e-6 or abs(iy) > spec.n1:
                        continue
                    tail = lat.id_at_key((ix, iy, ih_i, *skey[3:]))
                    if tail is None:
                        continue
                    cached.append((tail, transform_motion(m, lat.vertex(tail)), prov,
                                   ("e", tail, mkey)))
            self.cs.transform_cache[("pred", node)] = cached
        return cached


def prac_plan(sc: Scenario, cs: ControlSet, lat: Lattice, cfg: SteeringConfig,
              off: OffLatticeSet | None = None, heuristic=None,
              expansion_limit: int = 200_000) -> PlanResult:
    """Bidirectional weighted-A* plan over the control set.

    Start and goal may be lattice vertices or, when ``off`` is given,
    arbitrary configurations realized at the nearest tolerance-grid point.
    Raises ``NoPathError`` (with search statistics) when the frontiers
    exhaust or the expansion budget runs out.
    """
    began = time.perf_counter()
    search = _Search(sc, cs, lat, cfg, off, heuristic, expansion_limit)

    if not pose_collision_free(sc.start, sc) or not pose_collision_free(sc.goal, sc):
        raise ScenarioError("start or goal pose is in collision")

    start_node, realized_start = _root(search, sc.start, START_NODE)
    goal_node, realized_goal = _root(search, sc.goal, GOAL_NODE)
    search.node_cfg[START_NODE] = realized_start
    search.node_cfg[GOAL_NODE] = realized_goal

    if start_node != START_NODE:
        search.node_cfg[start_node] = lat.vertex(start_node)
    if goal_node != GOAL_NODE:
        search.node_cfg[goal_node] = lat.vertex(goal_node)

    if start_node == goal_node or realized_start.almost_equal(realized_goal, 1e-9):
        stats = search.stats
        stats.wall_time = time.perf_counter() - began
        return PlanResult((), 0.0, stats, realized_start, realized_goal, sc.lam)

    if start_node == START_NODE:
        search.entry_edges = _entry_edges(search, realized_start)
    if goal_node == GOAL_NODE:
        search.exit_edges = _exit_edges(search, realized_goal)

    search.g[0][start_node] = 0.0
    search.g[1][goal_node] = 0.0
    search._push(0, start_node, 0.0)
    search._push(1, goal_node, 0.0)

    heapq = search.heapq
    while search.open_heap[0] or search.open_heap[1]:
        if search.stats.expansions >= expansion_limit:
            break
        progressed = False
        for side in (0, 1):
            node = _pop(search, side)
            if node is None:
                continue
            progressed = True
            search.stats.expansions += 1
            if search.lam < 1.0:
                _try_connect(search, side, node)
                if search.best_cost < math.inf:
                    break
            edges = search.successors(node) if side == 0 else search.predecessors(node)
            for other, motion, prov, ckey in edges:
                search.node_cfg.setdefault(other, lat.vertex(other))
                if not search._edge_free(ckey, motion):
                    continue
                search._relax(side, other, search.g[side][node] + motion.cost,
                              node, PlanEdge(motion, prov))
        if search.lam < 1.0 and search.best_cost < math.inf:
            break
        if not progressed:
            break
        if search.best_cost < math.inf and _bounds_prove_optimal(search):
            break

    stats = search.stats
    stats.incumbent_trace = tuple(search.incumbents)
    stats.explored_edges = tuple(search._explored)
    stats.wall_time = time.perf_counter() - began
    if search.best_join is None:
        raise NoPathError(stats)

    edges = _reconstruct(search, start_node, goal_node)
    total = sum(e.motion.cost for e in edges)
    return PlanResult(tuple(edges), total, stats, realized_start, realized_goal, sc.lam)


def _root(search, cfg_point: Configuration, virtual_node):
    vid = search.lat.id_of(cfg_point)
    if vid is not None:
        return vid, search.lat.vertex(vid)
    if search.off is None:
        raise OffLatticeError(
            "endpoint is off-lattice and no off-lattice control set was supplied"
        )
    _key, snapped = search.off.match(cfg_point, search.lat)
    for state, tol in zip(
        (abs(snapped.x - cfg_point.x), abs(snapped.y - cfg_point.y)),
        search.off.tolerances[:2],
    ):
        if state > tol + 1e-9:
            raise OffLatticeError("endpoint is outside the tolerance grid coverage")
    return virtual_node, snapped


def _entry_edges(search, realized_start):
    key, snapped = search.off.match(realized_start, search.lat)
    out = []
    for n, m in enumerate(search.off.cells.get(key, ())):
        moved = transform_motion(m, snapped)
        vid = search.lat.id_of(moved.end)
        if vid is None:
            continue
        search.node_cfg.setdefault(vid, search.lat.vertex(vid))
        out.append((vid, moved, "entry", ("entry", n)))
    return out


def _exit_edges(search, realized_goal):
    key, snapped = search.off.match(realized_goal, search.lat)
    out = []
    for n, m in enumerate(search.off.cells.get(key, ())):
        moved = transform_motion(m, snapped)
        vid = search.lat.id_of(moved.end)
        if vid is None:
            continue
        search.node_cfg.setdefault(vid, search.lat.vertex(vid))
        reversed_m = _reverse_traversal(moved, search.cfg)
        out.append((vid, reversed_m, "exit", ("exit", n)))
    return out


def _pop(search, side):
    heap = search.open_heap[side]
    while heap:
        _f, g, node = search.heapq.heappop(heap)
        cur = search.open_g[side].get(node)
        if cur is None or abs(cur - g) > 1e-15:
            continue  # stale entry superseded by a cheaper push
        del search.open_g[side][node]
        return node
    return None


def _try_connect(search, side, node):
    opposite = search.open_g[1 - side]
    if not opposite:
        return
    cfg_node = search.cfg_of(node)
    best = min(
        opposite.items(),
        key=lambda kv: (search.h(cfg_node, search.cfg_of(kv[0])) + kv[1], kv[0]),
    )
    other, g_other = best
    cfg_other = search.cfg_of(other)
    try:
        if side == 0:
            motion = steer(cfg_node, cfg_other, search.cfg)
        else:
            motion = steer(cfg_other, cfg_node, search.cfg)
    except UnreachableConfigurationError:
        return
    search.stats.collision_checks += 1
    if not collision_free(motion, search.sc):
        return
    edge = PlanEdge(motion, "direct-connect")
    if side == 0:
        cost = search.g[0][node] + motion.cost + g_other
        search._offer(cost, ("connect", node, other, edge))
        search._relax(0, other, search.g[0][node] + motion.cost, node, edge)
    else:
        cost = search.g[1][node] + motion.cost + g_other
        search._offer(cost, ("connect", other, node, edge))
        search._relax(1, other, search.g[1][node] + motion.cost, node, edge)


def _bounds_prove_optimal(search) -> bool:
    """Both frontiers' admissible bounds have met the incumbent cost."""
    for side in (0, 1):
        target = search.node_cfg[GOAL_NODE if side == 0 else START_NODE]
        frontier = search.open_g[side]
        if frontier:
            bound = min(
                g + search.h(search.cfg_of(n), target) for n, g in frontier.items()
            )
            if bound < search.best_cost - 1e-12:
                return False
    return True


def _reconstruct(search, start_node, goal_node):
    kind = search.best_join[0]
    if kind == "vertex":
        meet = search.best_join[1]
        forward = _chain(search, 0, meet, start_node)
        backward = _chain_backward(search, meet, goal_node)
        return forward + backward
    _, i, j, edge = search.best_join
    forward = _chain(search, 0, i, start_node)
    backward = _chain_backward(search, j, goal_node)
    return forward + [edge] + backward


def _chain(search, side, node, root):
    edges = []
    while node != root:
        parent_node, edge = search.parent[side][node]
        edges.append(edge)
        node = parent_node
    edges.reverse()
    return edges


def _chain_backward(search, node, root):
    edges = []
    while node != root:
        parent_node, edge = search.parent[1][node]
        edges.append(edge)
        node = parent_node
    return edges
