"""Steering layer: configurations, Dubins paths, rigid transforms, reverse costs.

The steering function solves obstacle-free two-point boundary problems on
(x, y, heading) under a minimum turn radius and returns cost-minimizing
``Motion`` objects whose cost is arc length in meters.  Everything downstream
(lattice construction, control-set optimization, online search, smoothing)
treats steering as a black box, so another solver can be plugged in through
the ``steer_fn`` hooks those layers expose.  The bundled backend is Dubins:
it rejects configurations that carry higher-order states, since it cannot
connect them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

FORWARD = "forward"
REVERSE = "reverse"

# Absolute tolerance for cost comparisons throughout the package; desk-scale
# costs are O(10^2) meters so this is far below float noise amplification.
COST_ATOL = 1e-9

# Candidate Dubins words are discarded unless their integrated endpoint lands
# on the requested goal; guards against degenerate branches of the closed forms.
_ENDPOINT_TOL = 1e-6


class SteeringError(Exception):
    """Base class for steering failures."""


class UnreachableConfigurationError(SteeringError):
    """The active backend cannot connect the two configurations."""


class InvariantMismatchError(SteeringError):
    """Rigid transform requested between configurations whose non-transformable
    (higher-order) states differ."""


def norm_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b, in (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


@dataclass(frozen=True)
class Configuration:
    """A point in the vehicle configuration space.

    ``x, y`` are meters, ``theta`` is the heading in [0, 2*pi), and ``higher``
    holds any higher-order states (curvature, velocity, ...) in declaration
    order.  Position and heading transform rigidly; higher states do not.
    """

    x: float
    y: float
    theta: float
    higher: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", norm_angle(float(self.theta)))
        object.__setattr__(self, "higher", tuple(float(u) for u in self.higher))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta, *self.higher]

    def almost_equal(self, other: "Configuration", tol: float = COST_ATOL) -> bool:
        if len(self.higher) != len(other.higher):
            return False
        return (
            abs(self.x - other.x) <= tol
            and abs(self.y - other.y) <= tol
            and abs(angle_diff(self.theta, other.theta)) <= tol
            and all(abs(a - b) <= tol for a, b in zip(self.higher, other.higher))
        )


def config_from_list(values) -> Configuration:
    values = list(values)
    if len(values) < 3:
        raise ValueError("configuration needs at least [x, y, theta]")
    return Configuration(values[0], values[1], values[2], tuple(values[3:]))


@dataclass(frozen=True)
class SteeringConfig:
    """Backend parameters and the reverse-motion penalty.

    The penalty is the affine map ``psi(c) = reverse_scale * c +
    reverse_offset``; ``reverse_scale >= 1`` and ``reverse_offset >= 0``
    guarantee ``psi(c) >= c`` for every nonnegative cost.
    """

    min_turn_radius: float
    trace_step: float = 0.1
    reverse_scale: float = 2.0
    reverse_offset: float = 0.0

    def __post_init__(self):
        if self.min_turn_radius <= 0.0:
            raise ValueError("min_turn_radius must be positive")
        if self.trace_step <= 0.0:
            raise ValueError("trace_step must be positive")
        if self.reverse_scale < 1.0 or self.reverse_offset < 0.0:
            raise ValueError("reverse penalty must satisfy psi(c) >= c")

    def to_dict(self) -> dict:
        return {
            "min_turn_radius": self.min_turn_radius,
            "trace_step": self.trace_step,
            "reverse_scale": self.reverse_scale,
            "reverse_offset": self.reverse_offset,
        }

    @staticmethod
    def from_dict(d: dict) -> "SteeringConfig":
        return SteeringConfig(
            min_turn_radius=float(d["min_turn_radius"]),
            trace_step=float(d.get("trace_step", 0.1)),
            reverse_scale=float(d.get("reverse_scale", 2.0)),
            reverse_offset=float(d.get("reverse_offset", 0.0)),
        )


def reverse_cost(c: float, cfg: SteeringConfig) -> float:
    """Penalized cost of driving a forward motion of cost ``c`` backwards."""
    if c < 0.0:
        raise ValueError("motion cost must be nonnegative")
    return cfg.reverse_scale * c + cfg.reverse_offset


@dataclass(frozen=True)
class Segment:
    """One piece of a steering solution: a left/right arc or a straight.

    ``length`` is arc length in meters, ``curvature`` is the signed curvature
    (positive left, negative right, zero straight).
    """

    kind: str  # "L" | "S" | "R"
    length: float
    curvature: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "length": self.length, "curvature": self.curvature}

    @staticmethod
    def from_dict(d: dict) -> "Segment":
        return Segment(str(d["kind"]), float(d["length"]), float(d["curvature"]))


def advance_pose(x: float, y: float, theta: float, seg: Segment, length: float):
    """Pose after driving ``length`` meters along ``seg`` from (x, y, theta)."""
    if seg.curvature == 0.0:
        return x + length * math.cos(theta), y + length * math.sin(theta), theta
    r = 1.0 / abs(seg.curvature)
    if seg.curvature > 0.0:
        nt = theta + length / r
        return x + r * (math.sin(nt) - math.sin(theta)), y - r * (math.cos(nt) - math.cos(theta)), nt
    nt = theta - length / r
    return x + r * (math.sin(theta) - math.sin(nt)), y + r * (math.cos(nt) - math.cos(theta)), nt


def _pose_along(start: Configuration, segments, s: float):
    """Pose at traversal arc length ``s`` along a forward segment chain."""
    x, y, theta = start.x, start.y, start.theta
    remaining = s
    for seg in segments:
        if remaining <= seg.length:
            return advance_pose(x, y, theta, seg, remaining)
        x, y, theta = advance_pose(x, y, theta, seg, seg.length)
        remaining -= seg.length
    return x, y, theta


def _sample_forward(start: Configuration, segments, step: float) -> list[Configuration]:
    total = sum(seg.length for seg in segments)
    if total <= 0.0:
        return [start]
    count = max(1, math.ceil(total / step))
    points = [start]
    for k in range(1, count):
        x, y, theta = _pose_along(start, segments, k * step)
        points.append(Configuration(x, y, theta, start.higher))
    return points


@dataclass(frozen=True)
class Motion:
    """A steering solution between two configurations.

    ``segments`` plus ``start``/``end``/``direction`` are the compact
    descriptor: they regenerate the trace exactly.  For reverse motions the
    stored segments describe the underlying forward geometry, which runs from
    ``end`` to ``start`` and is driven backwards; the trace is that forward
    trace order-reversed.  ``cost`` is arc length for forward motions and the
    penalized arc length for reverse ones.
    """

    start: Configuration
    end: Configuration
    cost: float
    direction: str = FORWARD
    segments: tuple[Segment, ...] = ()
    trace: tuple[Configuration, ...] = ()

    @property
    def length(self) -> float:
        """Unpenalized arc length in meters."""
        return sum(seg.length for seg in self.segments)

    def descriptor(self) -> list[dict]:
        return [seg.to_dict() for seg in self.segments]

    def to_dict(self) -> dict:
        return {
            "start": self.start.as_list(),
            "end": self.end.as_list(),
            "cost": self.cost,
            "direction": self.direction,
            "segments": self.descriptor(),
        }


def motion_from_dict(d: dict, cfg: SteeringConfig) -> Motion:
    """Rebuild a motion (including its trace) from its serialized descriptor."""
    start = config_from_list(d["start"])
    end = config_from_list(d["end"])
    segments = tuple(Segment.from_dict(s) for s in d["segments"])
    direction = str(d["direction"])
    return _assemble_motion(start, end, float(d["cost"]), direction, segments, cfg)


def _assemble_motion(start, end, cost, direction, segments, cfg) -> Motion:
    if direction == FORWARD:
        trace = _sample_forward(start, segments, cfg.trace_step)
        trace.append(end)
    else:
        # Forward geometry is anchored at the reverse motion's end.
        fwd = _sample_forward(end, segments, cfg.trace_step)
        fwd.append(start)
        trace = list(reversed(fwd))
        trace[0] = start
        trace[-1] = end
    return Motion(start, end, cost, direction, tuple(segments), tuple(trace))


def zero_motion(at: Configuration) -> Motion:
    return Motion(at, at, 0.0, FORWARD, (), (at,))


# ---------------------------------------------------------------------------
# Dubins backend
# ---------------------------------------------------------------------------

def _dubins_candidates(alpha: float, beta: float, d: float):
    """All six Dubins words as (word, t, p, q) in normalized units.

    Arc lengths t, q (and p for the CCC words) are radians; p is the
    normalized straight length for CSC words.  Infeasible words are omitted.
    """
    sa, ca = math.sin(alpha), math.cos(alpha)
    sb, cb = math.sin(beta), math.cos(beta)
    c_ab = math.cos(alpha - beta)
    out = []

    # Exactly tangent geometries put p_squared a few ulp below zero.
    def _root(p_sq: float):
        if p_sq < -1e-9:
            return None
        return math.sqrt(max(p_sq, 0.0))

    p = _root(2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb))
    if p is not None:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out.append(("LSL", norm_angle(tmp - alpha), p, norm_angle(beta - tmp)))

    p = _root(2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa))
    if p is not None:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out.append(("RSR", norm_angle(alpha - tmp), p, norm_angle(tmp - beta)))

    p = _root(-2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb))
    if p is not None:
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out.append(("LSR", norm_angle(tmp - alpha), p, norm_angle(tmp - beta)))

    p = _root(-2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb))
    if p is not None:
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out.append(("RSL", norm_angle(alpha - tmp), p, norm_angle(beta - tmp)))

    tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1.0:
        p = norm_angle(TWO_PI - math.acos(tmp))
        t = norm_angle(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        out.append(("RLR", t, p, norm_angle(alpha - beta - t + p)))

    tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) <= 1.0:
        p = norm_angle(TWO_PI - math.acos(tmp))
        t = norm_angle(-alpha + math.atan2(cb - ca, d + sa - sb) + p / 2.0)
        out.append(("LRL", t, p, norm_angle(beta - alpha - t + p)))

    return out


def _word_segments(word: str, t: float, p: float, q: float, r: float):
    kappa = 1.0 / r
    lengths = (t * r, p * r, q * r)
    segs = []
    for kind, ln in zip(word, lengths):
        if ln <= 1e-12:
            continue
        curv = 0.0 if kind == "S" else (kappa if kind == "L" else -kappa)
        segs.append(Segment(kind, ln, curv))
    return tuple(segs)


def steer(a: Configuration, b: Configuration, cfg: SteeringConfig) -> Motion:
    """Cost-minimizing forward motion from ``a`` to ``b``.

    Raises ``UnreachableConfigurationError`` when the Dubins backend cannot
    connect the pair (any nonzero higher-order state, or a change in higher
    states, is out of its reach).
    """
    if a.higher != b.higher or any(u != 0.0 for u in a.higher):
        raise UnreachableConfigurationError(
            f"Dubins backend cannot connect higher-order states {a.higher} -> {b.higher}"
        )
    r = cfg.min_turn_radius
    dx, dy = b.x - a.x, b.y - a.y
    dist = math.hypot(dx, dy)
    if dist <= 1e-12 and abs(angle_diff(a.theta, b.theta)) <= 1e-12:
        return zero_motion(a)

    phi = math.atan2(dy, dx)
    alpha = norm_angle(a.theta - phi)
    beta = norm_angle(b.theta - phi)
    d = dist / r

    best = None
    for word, t, p, q in _dubins_candidates(alpha, beta, d):
        segs = _word_segments(word, t, p, q, r)
        x, y, theta = a.x, a.y, a.theta
        for seg in segs:
            x, y, theta = advance_pose(x, y, theta, seg, seg.length)
        if math.hypot(x - b.x, y - b.y) > _ENDPOINT_TOL * max(1.0, r):
            continue
        if abs(angle_diff(theta, b.theta)) > _ENDPOINT_TOL:
            continue
        cost = sum(seg.length for seg in segs)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, segs)
    if best is None:
        raise UnreachableConfigurationError(f"no Dubins word connects {a} -> {b}")
    cost, segs = best
    return _assemble_motion(a, b, cost, FORWARD, segs, cfg)


def steer_reverse(a: Configuration, b: Configuration, cfg: SteeringConfig) -> Motion:
    """Motion from ``a`` to ``b`` driven backwards.

    Geometrically this is the forward solution from ``b`` to ``a`` traversed
    in reverse; its cost is the penalized forward cost.
    """
    fwd = steer(b, a, cfg)
    return _assemble_motion(a, b, reverse_cost(fwd.cost, cfg), REVERSE, fwd.segments, cfg)


# ---------------------------------------------------------------------------
# Rigid transforms
# ---------------------------------------------------------------------------

def transform_endpoint(m: Motion, pose: Configuration) -> Configuration:
    """Endpoint of ``m`` rigidly moved so its start coincides with ``pose``."""
    if m.start.higher != pose.higher:
        raise InvariantMismatchError(
            f"higher-order states {m.start.higher} cannot be moved onto {pose.higher}"
        )
    rot = pose.theta - m.start.theta
    cr, sr = math.cos(rot), math.sin(rot)
    dx, dy = m.end.x - m.start.x, m.end.y - m.start.y
    return Configuration(
        pose.x + cr * dx - sr * dy,
        pose.y + sr * dx + cr * dy,
        m.end.theta + rot,
        m.end.higher,
    )


def transform_motion(m: Motion, pose: Configuration) -> Motion:
    """Rigidly rotate and translate ``m`` so that it starts at ``pose``.

    Headings compose, higher-order states are untouched; a mismatch between
    ``m.start``'s and ``pose``'s higher states is an error.
    """
    if m.start.higher != pose.higher:
        raise InvariantMismatchError(
            f"higher-order states {m.start.higher} cannot be moved onto {pose.higher}"
        )
    rot = pose.theta - m.start.theta
    cr, sr = math.cos(rot), math.sin(rot)
    ox, oy = m.start.x, m.start.y

    def moved(c: Configuration) -> Configuration:
        dx, dy = c.x - ox, c.y - oy
        return Configuration(pose.x + cr * dx - sr * dy, pose.y + sr * dx + cr * dy, c.theta + rot, c.higher)

    trace = [moved(c) for c in m.trace]
    if trace:
        trace[0] = pose
    return Motion(pose, moved(m.end), m.cost, m.direction, m.segments, tuple(trace))


def euclidean(a: Configuration, b: Configuration) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def slice_segments(segments, s0: float, s1: float) -> tuple[Segment, ...]:
    """Sub-chain of a segment sequence covering arc positions [s0, s1]."""
    out = []
    position = 0.0
    for seg in segments:
        lo = max(s0, position)
        hi = min(s1, position + seg.length)
        if hi - lo > 1e-12:
            out.append(Segment(seg.kind, hi - lo, seg.curvature))
        position += seg.length
        if position >= s1:
            break
    return tuple(out)


def pose_on_motion(m: Motion, s: float) -> Configuration:
    """Configuration at traversal arc position ``s`` along a motion.

    For reverse motions traversal runs against the stored forward geometry.
    """
    total = m.length
    s = min(max(s, 0.0), total)
    if m.direction == FORWARD:
        x, y, theta = _pose_along(m.start, m.segments, s)
    else:
        x, y, theta = _pose_along(m.end, m.segments, total - s)
    return Configuration(x, y, theta, m.start.higher)


def slice_motion(m: Motion, s0: float, s1: float, cfg: SteeringConfig) -> Motion:
    """Restriction of a motion to traversal positions [s0, s1].

    Keeps the drive direction; a reverse slice is re-penalized on its own
    length.  Slices of a collision-free motion stay on its swept volume.
    """
    if s1 <= s0 + 1e-12:
        return zero_motion(pose_on_motion(m, s0))
    total = m.length
    start = m.start if s0 <= 1e-12 else pose_on_motion(m, s0)
    end = m.end if s1 >= total - 1e-12 else pose_on_motion(m, s1)
    if m.direction == FORWARD:
        segs = slice_segments(m.segments, s0, s1)
        return _assemble_motion(start, end, s1 - s0, FORWARD, segs, cfg)
    segs = slice_segments(m.segments, total - s1, total - s0)
    cost = cfg.reverse_scale * (s1 - s0) + cfg.reverse_offset
    return _assemble_motion(start, end, cost, REVERSE, segs, cfg)
