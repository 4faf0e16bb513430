"""Multi-start state lattices, primitive libraries, pruning, and persistence.

A lattice samples each state on its own uniform grid.  Start vertices sit at
the origin with headings spanning the first quadrant of the heading grid,
crossed with every higher-state sample; quarter-turn rotations then map any
vertex's neighborhood onto a start's neighborhood, which is what lets one
primitive library serve the whole lattice.  Vertex ids are assigned starts
first (1..m), then the remaining grid points, so downstream solvers can rely
on the enumeration.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

from .steering import (
    Configuration,
    Motion,
    REVERSE,
    SteeringConfig,
    UnreachableConfigurationError,
    _assemble_motion,
    angle_diff,
    euclidean,
    motion_from_dict,
    steer,
    transform_endpoint,
)

SNAP_TOL = 1e-6  # per-state tolerance for deciding a value sits on the grid


class LatticeError(Exception):
    pass


class LatticeSizeError(LatticeError):
    """The requested grid exceeds the configured vertex budget."""


class OffLatticeError(LatticeError):
    """A configuration expected to lie on the lattice does not."""


@dataclass(frozen=True)
class StateGrid:
    """Uniform sampling of one higher-order state: ``count`` values spanning
    [lo, hi] inclusive."""

    count: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("state sample count must be >= 1")
        if self.hi < self.lo:
            raise ValueError("state bounds out of order")

    def values(self) -> tuple[float, ...]:
        if self.count == 1:
            return (self.lo,)
        step = (self.hi - self.lo) / (self.count - 1)
        return tuple(self.lo + k * step for k in range(self.count))

    def index_of(self, u: float, tol: float = SNAP_TOL):
        vals = self.values()
        best = min(range(len(vals)), key=lambda k: abs(vals[k] - u))
        if abs(vals[best] - u) > tol:
            return None
        return best

    def to_dict(self) -> dict:
        return {"count": self.count, "lo": self.lo, "hi": self.hi}

    @staticmethod
    def from_dict(d: dict) -> "StateGrid":
        return StateGrid(int(d["count"]), float(d["lo"]), float(d["hi"]))


@dataclass(frozen=True)
class LatticeSpec:
    """Grid geometry: spacings, half-extents, heading exponent, state grids.

    Headings are the 2**n2 values k*pi/2**(n2-1); n2 >= 2 so the start set can
    cover a full quadrant of headings.  ``prune_ratio`` (when set) drops
    vertices whose best motion from every start detours more than the given
    factor over the straight-line distance.
    """

    alpha: float
    beta: float
    n0: int
    n1: int
    n2: int
    state_samples: tuple[StateGrid, ...] = ()
    prune_ratio: float | None = None
    max_vertices: int = 250_000

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("grid spacings must be positive")
        if self.n0 < 0 or self.n1 < 0:
            raise ValueError("half-extents must be nonnegative")
        if self.n2 < 2:
            raise ValueError("need n2 >= 2 so start headings cover a quadrant")
        if self.prune_ratio is not None and self.prune_ratio < 1.0:
            raise ValueError("prune ratio must be >= 1")
        object.__setattr__(self, "state_samples", tuple(self.state_samples))

    @property
    def num_headings(self) -> int:
        return 2 ** self.n2

    @property
    def heading_step(self) -> float:
        return math.pi / 2 ** (self.n2 - 1)

    @property
    def quadrant_headings(self) -> int:
        """Headings per quadrant; also the number of start headings."""
        return 2 ** (self.n2 - 2)

    def vertex_count(self) -> int:
        count = (2 * self.n0 + 1) * (2 * self.n1 + 1) * self.num_headings
        for grid in self.state_samples:
            count *= grid.count
        return count

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "n0": self.n0,
            "n1": self.n1,
            "n2": self.n2,
            "state_samples": [g.to_dict() for g in self.state_samples],
            "prune_ratio": self.prune_ratio,
            "max_vertices": self.max_vertices,
        }

    @staticmethod
    def from_dict(d: dict) -> "LatticeSpec":
        return LatticeSpec(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            n0=int(d["n0"]),
            n1=int(d["n1"]),
            n2=int(d["n2"]),
            state_samples=tuple(StateGrid.from_dict(g) for g in d.get("state_samples", [])),
            prune_ratio=None if d.get("prune_ratio") is None else float(d["prune_ratio"]),
            max_vertices=int(d.get("max_vertices", 250_000)),
        )


GridKey = tuple  # (ix, iy, ih, *state indices)


class Lattice:
    """Immutable vertex table with starts-first ids and a pruned-vertex set."""

    def __init__(self, spec: LatticeSpec, configs: list[Configuration],
                 keys: list[GridKey], start_ids: tuple[int, ...],
                 pruned: frozenset[int] = frozenset()):
        self.spec = spec
        self._configs = configs  # index id-1
        self._keys = keys
        self._id_by_key = {key: vid for vid, key in enumerate(keys, start=1)}
        self.start_ids = start_ids
        self.pruned = pruned
        self._class_cache: dict[int, tuple[int, ...]] = {}

    # -- basic lookups ------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        """Total grid points, including pruned ones."""
        return len(self._configs)

    @property
    def num_starts(self) -> int:
        return len(self.start_ids)

    def vertex(self, vid: int) -> Configuration:
        return self._configs[vid - 1]

    def key(self, vid: int) -> GridKey:
        return self._keys[vid - 1]

    def is_start(self, vid: int) -> bool:
        return vid <= len(self.start_ids)

    def is_active(self, vid: int) -> bool:
        return 1 <= vid <= len(self._configs) and vid not in self.pruned

    def active_ids(self):
        return [vid for vid in range(1, len(self._configs) + 1) if vid not in self.pruned]

    def non_start_ids(self):
        m = len(self.start_ids)
        return [vid for vid in range(m + 1, len(self._configs) + 1) if vid not in self.pruned]

    # -- snapping -----------------------------------------------------------

    def key_of(self, cfg: Configuration):
        """Grid key of ``cfg`` if every state sits on the grid, else None."""
        spec = self.spec
        ix = round(cfg.x / spec.alpha)
        if abs(cfg.x - ix * spec.alpha) > SNAP_TOL or abs(ix) > spec.n0:
            return None
        iy = round(cfg.y / spec.beta)
        if abs(cfg.y - iy * spec.beta) > SNAP_TOL or abs(iy) > spec.n1:
            return None
        ih = round(cfg.theta / spec.heading_step) % spec.num_headings
        if abs(angle_diff(cfg.theta, ih * spec.heading_step)) > SNAP_TOL:
            return None
        if len(cfg.higher) != len(spec.state_samples):
            return None
        states = []
        for u, grid in zip(cfg.higher, spec.state_samples):
            idx = grid.index_of(u)
            if idx is None:
                return None
            states.append(idx)
        return (ix, iy, ih, *states)

    def id_of(self, cfg: Configuration, include_pruned: bool = False):
        """Vertex id of ``cfg`` if it is on the lattice (and unpruned), else None."""
        key = self.key_of(cfg)
        if key is None:
            return None
        vid = self._id_by_key.get(key)
        if vid is None:
            return None
        if not include_pruned and vid in self.pruned:
            return None
        return vid

    def id_at_key(self, key: GridKey, include_pruned: bool = False):
        vid = self._id_by_key.get(tuple(key))
        if vid is None:
            return None
        if not include_pruned and vid in self.pruned:
            return None
        return vid

    # -- relative starts ----------------------------------------------------

    def fold_heading_index(self, ih: int) -> int:
        """Heading index of the start whose neighborhood matches heading ih."""
        return ih % self.spec.quadrant_headings

    def relative_start_id(self, vid: int) -> int:
        key = self.key(vid)
        ih = key[2]
        start_key = (0, 0, self.fold_heading_index(ih), *key[3:])
        sid = self._id_by_key.get(start_key)
        if sid is None or not self.is_start(sid):
            raise OffLatticeError(f"vertex {vid} has no start in its class")
        return sid

    def class_members(self, sid: int) -> tuple[int, ...]:
        """Active vertices whose relative start is ``sid`` (starts included)."""
        cached = self._class_cache.get(sid)
        if cached is not None:
            return cached
        skey = self.key(sid)
        members = tuple(
            vid
            for vid in self.active_ids()
            if self.fold_heading_index(self.key(vid)[2]) == skey[2]
            and self.key(vid)[3:] == skey[3:]
        )
        self._class_cache[sid] = members
        return members

    def with_pruned(self, pruned) -> "Lattice":
        return Lattice(self.spec, self._configs, self._keys, self.start_ids, frozenset(pruned))


def build_lattice(spec: LatticeSpec) -> Lattice:
    """Materialize the vertex table for ``spec``.

    Starts get ids 1..m ordered by (heading, state indices); the remaining
    vertices follow in (ix, iy, heading, states) order.
    """
    total = spec.vertex_count()
    if total > spec.max_vertices:
        raise LatticeSizeError(f"lattice would have {total} vertices (cap {spec.max_vertices})")

    state_values = [grid.values() for grid in spec.state_samples]
    state_indices = [range(grid.count) for grid in spec.state_samples]

    start_keys = [
        (0, 0, ih, *states)
        for ih in range(spec.quadrant_headings)
        for states in itertools.product(*state_indices)
    ]
    start_set = set(start_keys)

    keys = list(start_keys)
    for ix in range(-spec.n0, spec.n0 + 1):
        for iy in range(-spec.n1, spec.n1 + 1):
            for ih in range(spec.num_headings):
                for states in itertools.product(*state_indices):
                    key = (ix, iy, ih, *states)
                    if key not in start_set:
                        keys.append(key)

    configs = []
    for key in keys:
        ix, iy, ih, *states = key
        higher = tuple(state_values[k][idx] for k, idx in enumerate(states))
        configs.append(
            Configuration(ix * spec.alpha, iy * spec.beta, ih * spec.heading_step, higher)
        )
    return Lattice(spec, configs, keys, tuple(range(1, len(start_keys) + 1)))


def relative_start(cfg: Configuration, lat: Lattice) -> Configuration:
    """Start vertex whose primitives transfer onto ``cfg``'s neighborhood.

    The heading folds into the first quadrant (quarter turns repeat the grid);
    higher-order states carry over unchanged.
    """
    vid = lat.id_of(cfg)
    if vid is None:
        raise OffLatticeError(f"{cfg} is not on the lattice")
    return lat.vertex(lat.relative_start_id(vid))


def valid_concatenation(vid: int, m: Motion, lat: Lattice):
    """Vertex reached by applying ``m`` at vertex ``vid``, or None.

    The motion is rigidly moved so it starts at the vertex; the concatenation
    is valid only when the moved endpoint lands on an active lattice vertex.
    """
    cfg = lat.vertex(vid)
    if m.start.higher != cfg.higher:
        return None
    end = transform_endpoint(m, cfg)
    return lat.id_of(end)


@dataclass
class PrimitiveLibrary:
    """Per-start motion sets: forward motions to every non-start vertex, plus
    any reverse augmentation.  ``failures`` records (start, target) pairs the
    steering backend could not connect."""

    forward: dict[int, dict[int, Motion]]
    reverse: dict[int, dict[int, Motion]] = field(default_factory=dict)
    failures: tuple = ()

    def motions(self, sid: int):
        out = list(self.forward.get(sid, {}).values())
        out.extend(self.reverse.get(sid, {}).values())
        return out

    def cost(self, sid: int, vid: int) -> float:
        return self.forward[sid][vid].cost

    def restrict(self, lat: Lattice) -> "PrimitiveLibrary":
        """Drop motions targeting pruned vertices."""
        fwd = {
            sid: {vid: m for vid, m in targets.items() if lat.is_active(vid)}
            for sid, targets in self.forward.items()
        }
        rev = {
            sid: {vid: m for vid, m in targets.items() if lat.is_active(vid)}
            for sid, targets in self.reverse.items()
        }
        return PrimitiveLibrary(fwd, rev, self.failures)


def build_primitive_library(lat: Lattice, cfg: SteeringConfig, steer_fn=steer) -> PrimitiveLibrary:
    """Cost-minimizing motion from every start to every active non-start vertex.

    Pairs the backend cannot connect are recorded in ``failures`` and left out.
    """
    forward: dict[int, dict[int, Motion]] = {}
    failures = []
    targets = lat.non_start_ids()
    for sid in lat.start_ids:
        scfg = lat.vertex(sid)
        table: dict[int, Motion] = {}
        for vid in targets:
            try:
                table[vid] = steer_fn(scfg, lat.vertex(vid), cfg)
            except UnreachableConfigurationError:
                failures.append((sid, vid))
        forward[sid] = table
    return PrimitiveLibrary(forward, failures=tuple(failures))


def prune(lat: Lattice, lib: PrimitiveLibrary, ratio: float) -> Lattice:
    """Drop vertices whose best motion from every start detours by more than
    ``ratio`` times the straight-line distance.  Starts are never dropped."""
    if ratio < 1.0:
        raise ValueError("prune ratio must be >= 1")
    if math.isinf(ratio):
        return lat
    removed = set(lat.pruned)
    for vid in lat.non_start_ids():
        target = lat.vertex(vid)
        keep = False
        for sid in lat.start_ids:
            motion = lib.forward.get(sid, {}).get(vid)
            if motion is None:
                continue
            if motion.cost <= ratio * euclidean(lat.vertex(sid), target) + SNAP_TOL:
                keep = True
                break
        if not keep:
            removed.add(vid)
    return lat.with_pruned(removed)


def add_reverse_primitives(lib: PrimitiveLibrary, lat: Lattice, cfg: SteeringConfig,
                           steer_fn=steer) -> PrimitiveLibrary:
    """Augment a forward library with reverse (backing-up) motions.

    Each forward motion is re-anchored so that it terminates at its start
    vertex, which makes the transplanted curve's far end the candidate reverse
    target; that end is rounded to the nearest grid point.  Per distinct
    rounded (x, y) cell, only the arc-length-minimal candidate is kept, and
    the stored motion is the steered connection driven backwards with the
    penalized cost.  In-place stop / curvature-change moves only make sense
    with a curvature-like higher state, which the Dubins backend does not
    model, so none are generated here.
    """
    spec = lat.spec
    reverse: dict[int, dict[int, Motion]] = {sid: dict(lib.reverse.get(sid, {})) for sid in lat.start_ids}
    for sid in lat.start_ids:
        scfg = lat.vertex(sid)
        skey = lat.key(sid)
        best: dict[tuple[int, int], tuple[float, int]] = {}
        for p in lib.forward.get(sid, {}).values():
            if p.end.higher != scfg.higher:
                continue
            rot = scfg.theta - p.end.theta
            cr, sr = math.cos(rot), math.sin(rot)
            ex, ey = p.end.x, p.end.y
            # Far end of the motion once it is re-anchored to terminate at the start.
            cx = -(cr * ex - sr * ey)
            cy = -(sr * ex + cr * ey)
            ekey = _rounded_reverse_key(lat, cx, cy, p, skey)
            if ekey is None:
                continue
            vid = lat.id_at_key(ekey)
            if vid is None or vid == sid:
                continue
            fwd_len = steer_fn(lat.vertex(vid), scfg, cfg).cost
            cell = (ekey[0], ekey[1])
            incumbent = best.get(cell)
            if incumbent is None or (fwd_len, vid) < incumbent:
                best[cell] = (fwd_len, vid)
        for _, vid in best.values():
            fwd = steer_fn(lat.vertex(vid), scfg, cfg)
            reverse[sid][vid] = _assemble_motion(
                scfg, lat.vertex(vid),
                cfg.reverse_scale * fwd.cost + cfg.reverse_offset,
                REVERSE, fwd.segments, cfg,
            )
    return PrimitiveLibrary(lib.forward, reverse, lib.failures)


def _rounded_reverse_key(lat: Lattice, cx: float, cy: float, p: Motion, skey) -> GridKey | None:
    """Nearest grid key to the re-anchored far end of a forward primitive.

    The position rounds (clamped to the extent); the heading is exact index
    arithmetic because both the start and the primitive end sit on the grid.
    """
    spec = lat.spec
    ix = min(max(round(cx / spec.alpha), -spec.n0), spec.n0)
    iy = min(max(round(cy / spec.beta), -spec.n1), spec.n1)
    pkey_end = lat.key_of(p.end)
    if pkey_end is None:
        return None
    ihe = (2 * skey[2] - pkey_end[2]) % spec.num_headings
    candidate = (ix, iy, ihe, *skey[3:])
    return candidate if candidate in lat._id_by_key else None


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def lattice_hash(lat: Lattice) -> str:
    payload = json.dumps(
        {"spec": lat.spec.to_dict(), "pruned": sorted(lat.pruned)},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def artifact_to_dict(lat: Lattice, lib: PrimitiveLibrary, cfg: SteeringConfig) -> dict:
    return {
        "format": "latticeplan-artifact/1",
        "spec": lat.spec.to_dict(),
        "vertices": [[vid, *lat.vertex(vid).as_list()] for vid in range(1, lat.num_vertices + 1)],
        "starts": list(lat.start_ids),
        "pruned": sorted(lat.pruned),
        "hash": lattice_hash(lat),
        "steering": cfg.to_dict(),
        "library": {
            "forward": {
                str(sid): {str(vid): m.to_dict() for vid, m in sorted(targets.items())}
                for sid, targets in sorted(lib.forward.items())
            },
            "reverse": {
                str(sid): {str(vid): m.to_dict() for vid, m in sorted(targets.items())}
                for sid, targets in sorted(lib.reverse.items())
            },
            "failures": [list(pair) for pair in lib.failures],
        },
    }


def artifact_from_dict(d: dict):
    spec = LatticeSpec.from_dict(d["spec"])
    lat = build_lattice(spec).with_pruned(set(d.get("pruned", [])))
    cfg = SteeringConfig.from_dict(d["steering"])
    # The vertex table is derivable from the spec; when present, make sure the
    # stored ids still mean the same configurations.
    for row in d.get("vertices", [])[:: max(1, len(d.get("vertices", [])) // 16)]:
        vid, *values = row
        if not lat.vertex(int(vid)).almost_equal(
            Configuration(values[0], values[1], values[2], tuple(values[3:])), 1e-9
        ):
            raise LatticeError("artifact vertex table disagrees with its spec")
    lib_d = d["library"]
    forward = {
        int(sid): {int(vid): motion_from_dict(md, cfg) for vid, md in targets.items()}
        for sid, targets in lib_d.get("forward", {}).items()
    }
    reverse = {
        int(sid): {int(vid): motion_from_dict(md, cfg) for vid, md in targets.items()}
        for sid, targets in lib_d.get("reverse", {}).items()
    }
    failures = tuple(tuple(pair) for pair in lib_d.get("failures", []))
    lib = PrimitiveLibrary(forward, reverse, failures)
    expected = d.get("hash")
    if expected is not None and expected != lattice_hash(lat):
        raise LatticeError("artifact hash does not match its lattice contents")
    return lat, lib, cfg


def save_artifact(lat: Lattice, lib: PrimitiveLibrary, cfg: SteeringConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(artifact_to_dict(lat, lib, cfg), fh, indent=1)


def load_artifact(path):
    with open(path) as fh:
        return artifact_from_dict(json.load(fh))
