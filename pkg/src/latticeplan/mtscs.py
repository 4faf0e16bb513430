"""Minimum t-spanning control sets: MILP encoding, exact solver, certificates.

A control set E picks, per start, a subset of the primitive library.  E
t-spans the lattice when, for every start s and vertex j, the shortest path
from s to j that only concatenates chosen primitives costs at most t times
the direct optimal motion.  The solver here is an exact combinatorial
branch-and-bound over primitive inclusion whose feasibility test is that
shortest-path check; the MILP model of the same problem is constructed
independently and can be exported in LP format for external solvers.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

from .lattice import Lattice, OffLatticeError, PrimitiveLibrary, lattice_hash
from .steering import COST_ATOL, Motion, SteeringConfig, motion_from_dict


class MtscsError(Exception):
    pass


class UnspannableError(MtscsError):
    """No control set can t-span the lattice at the requested t; carries the
    first (start, vertex) pair that cannot be covered."""

    def __init__(self, sid: int, vid: int, ratio: float):
        self.pair = (sid, vid)
        self.ratio = ratio
        super().__init__(f"pair (start {sid}, vertex {vid}) unreachable within factor {ratio}")


class BudgetExhaustedError(MtscsError):
    """Search node budget ran out; carries the best incumbent found so far."""

    def __init__(self, incumbent, certificate, nodes: int):
        self.incumbent = incumbent
        self.certificate = certificate
        self.nodes = nodes
        super().__init__(f"node budget exhausted after {nodes} nodes")


class CertificateError(MtscsError):
    """Decoded tree assignment violates the arborescence structure."""


PrimKey = tuple  # (start id, target vertex id)

_ROT_XY = (
    lambda x, y: (x, y),
    lambda x, y: (-y, x),
    lambda x, y: (-x, -y),
    lambda x, y: (y, -x),
)


def compute_sq(q: Motion, lat: Lattice, lib: PrimitiveLibrary | None = None):
    """All vertex pairs (i, j) realized by applying primitive ``q``.

    A pair qualifies when ``q`` moved rigidly onto tail ``i`` lands on an
    active lattice vertex ``j``; since steering costs are transform
    invariant, the moved motion is still the cost-minimizing connection.
    Always contains the primitive's own (start, target) pair.
    """
    sid = lat.id_of(q.start)
    if sid is None or not lat.is_start(sid):
        raise OffLatticeError("primitive does not originate at a start vertex")
    skey = lat.key(sid)
    ekey = lat.key_of(q.end)
    if ekey is None:
        raise OffLatticeError("primitive endpoint is not on the lattice")
    spec = lat.spec
    quadrant = spec.quadrant_headings
    ex, ey = q.end.x, q.end.y
    pairs = []
    for i in lat.class_members(sid):
        ikey = lat.key(i)
        turns = ((ikey[2] - skey[2]) % spec.num_headings) // quadrant
        rx, ry = _ROT_XY[turns](ex, ey)
        px = ikey[0] * spec.alpha + rx
        py = ikey[1] * spec.beta + ry
        jx = round(px / spec.alpha)
        if abs(px - jx * spec.alpha) > 1e-6 or abs(jx) > spec.n0:
            continue
        jy = round(py / spec.beta)
        if abs(py - jy * spec.beta) > 1e-6 or abs(jy) > spec.n1:
            continue
        jh = (ekey[2] + ikey[2] - skey[2]) % spec.num_headings
        j = lat.id_at_key((jx, jy, jh, *ekey[3:]))
        if j is not None:
            pairs.append((i, j))
    return pairs


class PrimitiveIndex:
    """Precomputed reusable-edge pairs, costs, and full-library baselines.

    ``baseline[s][j]`` is the shortest-path cost from start s to vertex j when
    every primitive is available; with a complete library it equals the direct
    motion cost (no concatenation beats the optimal connection), and it is the
    denominator of the spanning ratio either way.
    """

    def __init__(self, lat: Lattice, lib: PrimitiveLibrary):
        self.lat = lat
        self.lib = lib
        self.keys: list[PrimKey] = []
        self.pairs: dict[PrimKey, list] = {}
        self.cost: dict[PrimKey, float] = {}
        for sid in lat.start_ids:
            for vid, motion in sorted(lib.forward.get(sid, {}).items()):
                pk = (sid, vid)
                self.keys.append(pk)
                self.pairs[pk] = compute_sq(motion, lat, lib)
                self.cost[pk] = motion.cost
        self.baseline: dict[int, dict] = {}
        self.baseline_tree: dict[int, dict] = {}
        full = self.adjacency(self.keys)
        for sid in lat.start_ids:
            dist, parent = self.shortest_from(full, sid)
            self.baseline[sid] = dist
            self.baseline_tree[sid] = parent

    def adjacency(self, selected) -> dict:
        adj: dict[int, list] = {}
        for pk in selected:
            c = self.cost[pk]
            for i, j in self.pairs[pk]:
                adj.setdefault(i, []).append((j, c, pk))
        return adj

    def shortest_from(self, adj: dict, source: int):
        """Dijkstra with deterministic tie-breaking (lowest parent id on equal
        cost).  Returns (dist, parent) keyed by vertex id; parent entries are
        (parent id, primitive key)."""
        dist = {source: 0.0}
        parent: dict[int, tuple] = {}
        heap = [(0.0, source)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, c, pk in adj.get(u, ()):
                nd = d + c
                old = dist.get(v)
                if old is None or nd < old - 1e-15:
                    dist[v] = nd
                    parent[v] = (u, pk)
                    heapq.heappush(heap, (nd, v))
                elif old is not None and abs(nd - old) <= 1e-15 and v not in done:
                    if v in parent and u < parent[v][0]:
                        parent[v] = (u, pk)
        return dist, parent

    def span_ratio(self, selected):
        """Worst-case ratio of control-set path cost to direct cost, with the
        arg-max pair; (inf, pair) when some vertex is unreachable."""
        worst = 0.0
        worst_pair = None
        adj = self.adjacency(selected)
        for sid in self.lat.start_ids:
            dist, _ = self.shortest_from(adj, sid)
            for vid in self.lat.non_start_ids():
                base = self.baseline[sid].get(vid)
                d = dist.get(vid)
                if d is None or base is None:
                    return math.inf, (sid, vid)
                ratio = d / base if base > 0.0 else 1.0
                if ratio > worst:
                    worst = ratio
                    worst_pair = (sid, vid)
        return worst, worst_pair

    def feasible(self, selected, t: float) -> bool:
        """True when every (start, vertex) pair is covered within factor t.

        Uses the absolute-tolerance comparison d <= t*c + COST_ATOL per pair,
        which is the contract the solver and its tests share.
        """
        adj = self.adjacency(selected)
        for sid in self.lat.start_ids:
            dist, _ = self.shortest_from(adj, sid)
            for vid in self.lat.non_start_ids():
                base = self.baseline[sid].get(vid)
                d = dist.get(vid)
                if base is None or d is None or d > t * base + COST_ATOL:
                    return False
        return True


# ---------------------------------------------------------------------------
# Control sets and certificates
# ---------------------------------------------------------------------------

@dataclass
class ControlSet:
    """Chosen per-start primitive sets plus solve metadata."""

    per_start: dict[int, dict[int, Motion]]
    reverse: dict[int, dict[int, Motion]] = field(default_factory=dict)
    t: float = 1.0
    objective_mode: str = "max"
    objective: int = 0
    achieved_t_error: float = 1.0
    lattice_hash: str = ""
    solver: dict = field(default_factory=dict)
    # Per-process memo of motions transplanted onto vertices; planners share
    # it across queries against the same lattice.
    transform_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def sizes(self) -> dict[int, int]:
        return {sid: len(targets) for sid, targets in self.per_start.items()}

    def motions(self, sid: int):
        out = list(self.per_start.get(sid, {}).values())
        out.extend(self.reverse.get(sid, {}).values())
        return out

    def prim_keys(self):
        return [(sid, vid) for sid, targets in sorted(self.per_start.items())
                for vid in sorted(targets)]

    def edge_relation(self, lat: Lattice):
        """Derived edges: every (i, j) pair some chosen primitive realizes."""
        edges = set()
        for sid, targets in self.per_start.items():
            for motion in targets.values():
                edges.update(compute_sq(motion, lat))
        return sorted(edges)

    def as_library(self) -> PrimitiveLibrary:
        return PrimitiveLibrary(
            {sid: dict(t) for sid, t in self.per_start.items()},
            {sid: dict(t) for sid, t in self.reverse.items()},
        )


@dataclass
class SpannerCertificate:
    """Per-start shortest-path arborescence: vertex -> (parent, path cost)."""

    trees: dict[int, dict[int, tuple[int, float]]]

    def path_cost(self, sid: int, vid: int) -> float:
        entry = self.trees.get(sid, {}).get(vid)
        return math.inf if entry is None else entry[1]

    def edges(self, sid: int):
        return sorted((parent, vid) for vid, (parent, _) in self.trees[sid].items())


def t_error(cs: ControlSet, lat: Lattice, lib: PrimitiveLibrary) -> float:
    """Exact worst-case ratio of control-set path cost to direct motion cost.

    Infinite when some vertex cannot be reached from some start at all.
    """
    idx = PrimitiveIndex(lat, lib)
    ratio, _ = idx.span_ratio([pk for pk in cs.prim_keys() if pk in idx.cost])
    return ratio


def _certificate_for(idx: PrimitiveIndex, selected) -> SpannerCertificate:
    trees = {}
    adj = idx.adjacency(selected)
    for sid in idx.lat.start_ids:
        dist, parent = idx.shortest_from(adj, sid)
        tree = {}
        for vid, (par, _pk) in parent.items():
            tree[vid] = (par, dist[vid])
        trees[sid] = tree
    return SpannerCertificate(trees)


def _objective(selected, start_ids, mode: str) -> int:
    sizes = {sid: 0 for sid in start_ids}
    for sid, _vid in selected:
        sizes[sid] += 1
    if mode == "sum":
        return sum(sizes.values())
    return max(sizes.values()) if sizes else 0


def _greedy_span(idx: PrimitiveIndex, t: float):
    """Feasible seed: per round and per start, repair the cheapest violated
    target by adding its direct primitive (or, when no direct motion exists,
    every primitive along its full-library shortest path).  Each repaired
    pair stays satisfied, so the loop terminates in a t-spanning set."""
    selected: list[PrimKey] = []
    chosen = set()
    while True:
        additions = []
        adj = idx.adjacency(selected)
        for sid in idx.lat.start_ids:
            dist, _ = idx.shortest_from(adj, sid)
            worst = None
            for vid in idx.lat.non_start_ids():
                base = idx.baseline[sid][vid]
                if dist.get(vid, math.inf) > t * base + COST_ATOL:
                    if worst is None or base < worst[0]:
                        worst = (base, vid)
            if worst is None:
                continue
            vid = worst[1]
            if (sid, vid) in idx.cost:
                repair = [(sid, vid)]
            else:
                repair = []
                node = vid
                while node != sid:
                    parent, pk = idx.baseline_tree[sid][node]
                    repair.append(pk)
                    node = parent
            additions.extend(pk for pk in repair if pk not in chosen)
        if not additions:
            return selected
        for pk in additions:
            chosen.add(pk)
            selected.append(pk)


def solve_mtscs(lat: Lattice, lib: PrimitiveLibrary, t: float,
                node_budget: int | None = None, objective_mode: str = "max",
                index: PrimitiveIndex | None = None):
    """Exact minimum t-spanning control set via branch-and-bound.

    Branches over primitive inclusion in descending reusable-pair order; a
    node closes as soon as its included set already t-spans (supersets only
    grow the objective) and prunes when even including every undecided
    primitive cannot span.  Raises ``BudgetExhaustedError`` carrying the best
    incumbent when ``node_budget`` runs out before optimality is proven.
    """
    if t < 1.0:
        raise ValueError("stretch factor t must be >= 1")
    if objective_mode not in ("max", "sum"):
        raise ValueError("objective_mode must be 'max' or 'sum'")
    began = time.perf_counter()
    idx = index if index is not None else PrimitiveIndex(lat, lib)

    ratio, worst_pair = idx.span_ratio(idx.keys)
    if ratio > t + COST_ATOL:
        raise UnspannableError(worst_pair[0], worst_pair[1], ratio)

    order = sorted(idx.keys, key=lambda pk: (-len(idx.pairs[pk]), pk))
    incumbent = sorted(_greedy_span(idx, t))
    best_obj = _objective(incumbent, lat.start_ids, objective_mode)

    nodes = 0
    proven = True
    # Stack entries: (next undecided position, included primitive keys).
    stack = [(0, ())]
    while stack:
        if node_budget is not None and nodes >= node_budget:
            proven = False
            break
        nodes += 1
        pos, included = stack.pop()
        obj_in = _objective(included, lat.start_ids, objective_mode)
        if obj_in >= best_obj:
            continue
        if idx.feasible(included, t):
            incumbent = sorted(included)
            best_obj = obj_in
            continue
        if pos == len(order):
            continue
        if not idx.feasible(list(included) + order[pos:], t):
            continue
        q = order[pos]
        stack.append((pos + 1, included))
        stack.append((pos + 1, included + (q,)))

    per_start: dict[int, dict[int, Motion]] = {sid: {} for sid in lat.start_ids}
    for sid, vid in incumbent:
        per_start[sid][vid] = lib.forward[sid][vid]
    achieved, _ = idx.span_ratio(incumbent)
    cs = ControlSet(
        per_start=per_start,
        t=t,
        objective_mode=objective_mode,
        objective=best_obj,
        achieved_t_error=achieved,
        lattice_hash=lattice_hash(lat),
        solver={
            "nodes": nodes,
            "wall_time": time.perf_counter() - began,
            "proven_optimal": proven,
        },
    )
    cert = _certificate_for(idx, incumbent)
    if not proven:
        raise BudgetExhaustedError(cs, cert, nodes)
    return cs, cert


# ---------------------------------------------------------------------------
# MILP model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple  # ((coef, varname), ...)
    sense: str  # "<=" | "="
    rhs: float


@dataclass
class MilpModel:
    """Neutral MILP representation of the control-set problem.

    Binary y variables pick primitives per start, binary x variables place
    per-start copies of realizable edges into shortest-path trees, continuous
    z variables carry path costs, and K bounds every start's primitive count.
    Big-M row deactivation constants live in ``big_m``.
    """

    t: float
    y_vars: tuple[str, ...]
    x_vars: tuple[str, ...]
    z_vars: tuple[str, ...]
    rows: tuple[Row, ...]
    big_m: dict
    edge_pairs: tuple  # union of realizable (i, j) pairs
    counts: dict

    @property
    def binaries(self):
        return tuple(self.y_vars) + tuple(self.x_vars)


def _yname(pk: PrimKey) -> str:
    return f"y_{pk[1]}_{pk[0]}"


def _xname(i: int, j: int, s: int) -> str:
    return f"x_{i}_{j}_{s}"


def _zname(i: int, s: int) -> str:
    return f"z_{i}_{s}"


def build_milp(lat: Lattice, lib: PrimitiveLibrary, t: float, cfg: SteeringConfig,
               index: PrimitiveIndex | None = None, steer_fn=None) -> MilpModel:
    """Assemble the mixed-integer model whose optimum is the minimum
    max-cardinality t-spanning control set.

    Roots: per-start cardinality rows bound K; usable-edge rows gate every
    copy of an edge behind its owning primitive; big-M cost rows force path
    costs to telescope along tree edges; bound rows cap each path cost at t
    times the direct cost; unit in-degree rows make the x choices a tree.
    """
    if t < 1.0:
        raise ValueError("stretch factor t must be >= 1")
    idx = index if index is not None else PrimitiveIndex(lat, lib)
    starts = list(lat.start_ids)
    non_starts = lat.non_start_ids()
    active = lat.active_ids()

    for sid in starts:
        missing = [vid for vid in non_starts if vid not in lib.forward.get(sid, {})]
        if missing:
            raise MtscsError(f"library incomplete: start {sid} lacks motions to {missing[:3]}")

    if steer_fn is None:
        from .steering import steer as steer_fn

    # Direct costs from every start to every active vertex (steered on demand
    # for start-to-start pairs, which the library does not store).
    direct: dict[tuple[int, int], float] = {}
    for sid in starts:
        for vid in active:
            if vid == sid:
                direct[(sid, vid)] = 0.0
            elif lat.is_start(vid):
                direct[(sid, vid)] = math.inf  # filled below only if needed
            else:
                direct[(sid, vid)] = lib.forward[sid][vid].cost

    edge_owner: dict[tuple[int, int], PrimKey] = {}
    for pk in idx.keys:
        for pair in idx.pairs[pk]:
            edge_owner[pair] = pk
    edge_pairs = sorted(edge_owner)

    # Start-to-start direct costs are only needed where a start is an edge tail.
    need_start_cost = {i for i, _j in edge_pairs if lat.is_start(i)}
    for sid in starts:
        for other in need_start_cost:
            if other != sid and math.isinf(direct[(sid, other)]):
                direct[(sid, other)] = steer_fn(lat.vertex(sid), lat.vertex(other), cfg).cost

    y_vars = [_yname(pk) for pk in idx.keys]
    x_vars = [_xname(i, j, s) for s in starts for (i, j) in edge_pairs]
    z_vars = [_zname(i, s) for s in starts for i in active]

    rows: list[Row] = []
    big_m: dict = {}

    for sid in starts:
        terms = [(1.0, _yname(pk)) for pk in idx.keys if pk[0] == sid]
        rows.append(Row(f"card_{sid}", tuple(terms + [(-1.0, "K")]), "<=", 0.0))

    for pk in idx.keys:
        for (i, j) in idx.pairs[pk]:
            for s in starts:
                rows.append(Row(f"use_{i}_{j}_{s}", ((1.0, _xname(i, j, s)), (-1.0, _yname(pk))), "<=", 0.0))

    for s in starts:
        for (i, j) in edge_pairs:
            c_ij = idx.cost[edge_owner[(i, j)]]
            m_val = t * direct[(s, i)] + c_ij - direct[(s, j)]
            big_m[(i, j, s)] = m_val
            rows.append(Row(
                f"cost_{i}_{j}_{s}",
                ((1.0, _zname(i, s)), (-1.0, _zname(j, s)), (m_val, _xname(i, j, s))),
                "<=", m_val - c_ij,
            ))

    for s in starts:
        for j in non_starts:
            rows.append(Row(f"bound_{j}_{s}", ((1.0, _zname(j, s)),), "<=", t * direct[(s, j)]))

    in_edges: dict[int, list] = {}
    for (i, j) in edge_pairs:
        in_edges.setdefault(j, []).append(i)
    for s in starts:
        for j in non_starts:
            terms = tuple((1.0, _xname(i, j, s)) for i in in_edges.get(j, []))
            rows.append(Row(f"tree_{j}_{s}", terms, "=", 1.0))

    counts = {
        "y": len(y_vars),
        "x": len(x_vars),
        "z": len(z_vars),
        "card_rows": len(starts),
        "use_rows": sum(len(idx.pairs[pk]) for pk in idx.keys) * len(starts),
        "cost_rows": len(edge_pairs) * len(starts),
        "bound_rows": len(non_starts) * len(starts),
        "tree_rows": len(non_starts) * len(starts),
    }
    return MilpModel(
        t=t,
        y_vars=tuple(y_vars),
        x_vars=tuple(x_vars),
        z_vars=tuple(z_vars),
        rows=tuple(rows),
        big_m=big_m,
        edge_pairs=tuple(edge_pairs),
        counts=counts,
    )


def _fmt(v: float) -> str:
    text = f"{v:.12g}"
    return "0" if text == "-0" else text


def export_lp(model: MilpModel) -> str:
    """Serialize the model in LP file format with deterministic naming."""
    lines = ["Minimize", " obj: K", "Subject To"]
    for row in model.rows:
        parts = []
        for coef, var in row.terms:
            if not parts:
                if coef == 1.0:
                    parts.append(var)
                elif coef == -1.0:
                    parts.append(f"- {var}")
                else:
                    parts.append(f"{_fmt(coef)} {var}")
            else:
                sign = "+" if coef >= 0.0 else "-"
                mag = abs(coef)
                if mag == 1.0:
                    parts.append(f"{sign} {var}")
                else:
                    parts.append(f"{sign} {_fmt(mag)} {var}")
        expr = " ".join(parts) if parts else "0 K"
        lines.append(f" {row.name}: {expr} {row.sense} {_fmt(row.rhs)}")
    lines.append("Bounds")
    lines.append(" K >= 0")
    for z in model.z_vars:
        lines.append(f" {z} >= 0")
    lines.append("Binary")
    for var in model.binaries:
        lines.append(f" {var}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Assignments and certificates against the MILP rows
# ---------------------------------------------------------------------------

def build_assignment(cs: ControlSet, lat: Lattice, lib: PrimitiveLibrary, t: float,
                     cfg: SteeringConfig, index: PrimitiveIndex | None = None,
                     steer_fn=None) -> dict:
    """Witness (y, x, z, K) for a t-spanning control set, built from its
    shortest-path trees.

    Edges into start vertices have no x variable (trees never need them), so
    a start that merely relays a path keeps its z at the smaller of its true
    path cost and t times its direct cost, which satisfies every cost row.
    """
    idx = index if index is not None else PrimitiveIndex(lat, lib)
    if steer_fn is None:
        from .steering import steer as steer_fn
    selected = [pk for pk in cs.prim_keys() if pk in idx.cost]
    chosen = set(selected)
    assignment: dict[str, float] = {}
    for pk in idx.keys:
        assignment[_yname(pk)] = 1.0 if pk in chosen else 0.0

    model_edges = set()
    for pk in idx.keys:
        model_edges.update(idx.pairs[pk])

    sizes = cs.sizes()
    assignment["K"] = float(max(sizes.values())) if sizes else 0.0

    adj = idx.adjacency(selected)
    for sid in lat.start_ids:
        dist, parent = idx.shortest_from(adj, sid)
        tree_edges = {(par, vid) for vid, (par, _pk) in parent.items() if not lat.is_start(vid)}
        for (i, j) in model_edges:
            assignment[_xname(i, j, sid)] = 1.0 if (i, j) in tree_edges else 0.0
        for vid in lat.active_ids():
            if vid == sid:
                z = 0.0
            elif lat.is_start(vid):
                direct = steer_fn(lat.vertex(sid), lat.vertex(vid), cfg).cost
                z = min(dist.get(vid, math.inf), t * direct)
            else:
                z = dist.get(vid, math.inf)
            assignment[_zname(vid, sid)] = z
    return assignment


def check_rows(model: MilpModel, assignment: dict, tol: float = 1e-7):
    """Names of rows the assignment violates (empty list means all hold)."""
    bad = []
    for row in model.rows:
        value = sum(coef * assignment[var] for coef, var in row.terms)
        if row.sense == "<=":
            if value > row.rhs + tol:
                bad.append(row.name)
        else:
            if abs(value - row.rhs) > tol:
                bad.append(row.name)
    return bad


def decode_certificate(assignment: dict, lat: Lattice, lib: PrimitiveLibrary,
                       t: float) -> SpannerCertificate:
    """Recover per-start trees from an x/z assignment and validate them.

    Raises ``CertificateError`` when some non-start vertex lacks a unique
    in-edge, the edges contain a cycle, path costs fail to telescope along
    tree edges, or a path cost exceeds its t bound.
    """
    non_starts = set(lat.non_start_ids())
    trees = {}
    for sid in lat.start_ids:
        edges = []
        for name, value in assignment.items():
            if not name.startswith("x_") or round(value) != 1:
                continue
            _x, i_s, j_s, s_s = name.split("_")
            if int(s_s) != sid:
                continue
            edges.append((int(i_s), int(j_s)))
        indeg: dict[int, list] = {}
        for i, j in edges:
            indeg.setdefault(j, []).append(i)
        for j in non_starts:
            if len(indeg.get(j, [])) != 1:
                raise CertificateError(f"vertex {j} has in-degree {len(indeg.get(j, []))} in tree {sid}")
        # Cycle check: walk parents; every chain must terminate at a start.
        parents = {j: ins[0] for j, ins in indeg.items()}
        for j in non_starts:
            seen = set()
            node = j
            while node in parents:
                if node in seen:
                    raise CertificateError(f"cycle through vertex {node} in tree {sid}")
                seen.add(node)
                node = parents[node]
        tree = {}
        for j in non_starts:
            z = assignment.get(_zname(j, sid))
            par = parents[j]
            zp = assignment.get(_zname(par, sid), 0.0)
            c_par = _edge_cost(lat, lib, par, j)
            if z is not None and z + 1e-7 < zp + c_par:
                raise CertificateError(f"path cost at {j} below telescoped cost in tree {sid}")
            if z is not None:
                direct = lib.forward[sid][j].cost
                if z > t * direct + 1e-7:
                    raise CertificateError(f"path cost at {j} exceeds bound in tree {sid}")
            tree[j] = (par, z if z is not None else math.inf)
        trees[sid] = tree
    return SpannerCertificate(trees)


def _edge_cost(lat: Lattice, lib: PrimitiveLibrary, i: int, j: int) -> float:
    sid = lat.relative_start_id(i)
    ikey, jkey = lat.key(i), lat.key(j)
    skey = lat.key(sid)
    spec = lat.spec
    turns = ((ikey[2] - skey[2]) % spec.num_headings) // spec.quadrant_headings
    dx = jkey[0] * spec.alpha - ikey[0] * spec.alpha
    dy = jkey[1] * spec.beta - ikey[1] * spec.beta
    # Undo the quarter-turn to find the primitive's own endpoint.
    ux, uy = _ROT_XY[(4 - turns) % 4](dx, dy)
    eh = (jkey[2] - ikey[2] + skey[2]) % spec.num_headings
    ekey = (round(ux / spec.alpha), round(uy / spec.beta), eh, *jkey[3:])
    vid = lat.id_at_key(ekey, include_pruned=True)
    if vid is None or vid not in lib.forward.get(sid, {}):
        raise CertificateError(f"edge ({i}, {j}) matches no primitive")
    return lib.forward[sid][vid].cost


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def control_set_to_dict(cs: ControlSet, lat: Lattice, cfg: SteeringConfig) -> dict:
    return {
        "format": "latticeplan-control-set/1",
        "lattice": {"spec": lat.spec.to_dict(), "pruned": sorted(lat.pruned)},
        "lattice_hash": cs.lattice_hash,
        "steering": cfg.to_dict(),
        "t": cs.t,
        "objective_mode": cs.objective_mode,
        "objective": cs.objective,
        "t_error": cs.achieved_t_error,
        "solver": dict(cs.solver),
        "per_start": {
            str(sid): {str(vid): m.to_dict() for vid, m in sorted(targets.items())}
            for sid, targets in sorted(cs.per_start.items())
        },
        "reverse": {
            str(sid): {str(vid): m.to_dict() for vid, m in sorted(targets.items())}
            for sid, targets in sorted(cs.reverse.items())
        },
    }


def control_set_from_dict(d: dict):
    from .lattice import LatticeSpec, build_lattice

    spec = LatticeSpec.from_dict(d["lattice"]["spec"])
    lat = build_lattice(spec).with_pruned(set(d["lattice"].get("pruned", [])))
    cfg = SteeringConfig.from_dict(d["steering"])
    per_start = {
        int(sid): {int(vid): motion_from_dict(md, cfg) for vid, md in targets.items()}
        for sid, targets in d.get("per_start", {}).items()
    }
    reverse = {
        int(sid): {int(vid): motion_from_dict(md, cfg) for vid, md in targets.items()}
        for sid, targets in d.get("reverse", {}).items()
    }
    cs = ControlSet(
        per_start=per_start,
        reverse=reverse,
        t=float(d["t"]),
        objective_mode=str(d.get("objective_mode", "max")),
        objective=int(d["objective"]),
        achieved_t_error=float(d["t_error"]),
        lattice_hash=str(d.get("lattice_hash", "")),
        solver=dict(d.get("solver", {})),
    )
    return cs, lat, cfg
