"""Independent reference implementations used only by the test suite.

Everything here deliberately avoids the package's solver/search code paths:
edges come straight from endpoint transforms, shortest paths from a separate
Dijkstra, and optimal control sets from exhaustive subset enumeration.
"""

import heapq
import itertools
import math

from latticeplan.steering import transform_endpoint

COST_ATOL = 1e-9


def basic_dijkstra(adj, source):
    """Plain binary-heap Dijkstra over ``adj[u] -> [(v, cost), ...]``."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        for v, c in adj.get(u, ()):
            nd = d + c
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def primitive_edges(lat, motion):
    """Pairs (tail, head) the motion realizes, via direct endpoint transforms."""
    sid = lat.id_of(motion.start)
    out = []
    for vid in lat.active_ids():
        tail = lat.vertex(vid)
        if lat.relative_start_id(vid) != sid:
            continue
        head = lat.id_of(transform_endpoint(motion, tail))
        if head is not None:
            out.append((vid, head))
    return out


def spans(lat, lib, selections, t, edge_cache):
    """True when the chosen per-start subsets t-span every (start, target)."""
    adj = {}
    for sid, chosen in selections.items():
        for vid in chosen:
            cost = lib.forward[sid][vid].cost
            for i, j in edge_cache[(sid, vid)]:
                adj.setdefault(i, []).append((j, cost))
    for sid in lat.start_ids:
        dist = basic_dijkstra(adj, sid)
        for vid in lat.non_start_ids():
            direct = lib.forward[sid][vid].cost
            if dist.get(vid, math.inf) > t * direct + COST_ATOL:
                return False
    return True


def oracle_min_tspan(lat, lib, t, objective="max"):
    """Optimal objective over every per-start primitive subset, by brute force.

    Enumerates subsets in ascending objective order so the first feasible
    candidate is optimal.
    """
    starts = list(lat.start_ids)
    per_start_prims = {sid: sorted(lib.forward[sid]) for sid in starts}
    edge_cache = {
        (sid, vid): primitive_edges(lat, lib.forward[sid][vid])
        for sid in starts
        for vid in per_start_prims[sid]
    }

    by_size = {}
    for sid in starts:
        prims = per_start_prims[sid]
        by_size[sid] = [
            [frozenset(c) for c in itertools.combinations(prims, k)]
            for k in range(len(prims) + 1)
        ]

    max_size = max(len(per_start_prims[sid]) for sid in starts)
    if objective == "max":
        budgets = range(0, max_size + 1)
        for cap in budgets:
            pools = [
                [c for k in range(0, min(cap, len(per_start_prims[sid])) + 1)
                 for c in by_size[sid][k]]
                for sid in starts
            ]
            for combo in itertools.product(*pools):
                if max((len(c) for c in combo), default=0) != cap:
                    continue
                selections = dict(zip(starts, combo))
                if spans(lat, lib, selections, t, edge_cache):
                    return cap
        return math.inf
    # sum objective: ascending total size
    total_max = sum(len(per_start_prims[sid]) for sid in starts)
    for budget in range(0, total_max + 1):
        for split in _splits(budget, [len(per_start_prims[s]) for s in starts]):
            pools = [by_size[sid][k] for sid, k in zip(starts, split)]
            for combo in itertools.product(*pools):
                selections = dict(zip(starts, combo))
                if spans(lat, lib, selections, t, edge_cache):
                    return budget
    return math.inf


def _splits(total, caps):
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(0, min(total, caps[0]) + 1):
        for rest in _splits(total - first, caps[1:]):
            yield (first, *rest)
