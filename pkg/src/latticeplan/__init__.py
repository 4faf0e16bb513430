"""Lattice motion planning with minimum t-spanning primitive control sets."""

from .steering import (
    Configuration,
    Motion,
    Segment,
    SteeringConfig,
    steer,
    steer_reverse,
    reverse_cost,
    transform_motion,
)
from .lattice import (
    Lattice,
    LatticeSpec,
    PrimitiveLibrary,
    StateGrid,
    add_reverse_primitives,
    build_lattice,
    build_primitive_library,
    prune,
    relative_start,
    valid_concatenation,
)
from .mtscs import (
    ControlSet,
    MilpModel,
    SpannerCertificate,
    build_milp,
    compute_sq,
    decode_certificate,
    export_lp,
    solve_mtscs,
    t_error,
)
from .planner import (
    Footprint,
    OffLatticeSet,
    PlanResult,
    Scenario,
    build_offlattice_set,
    collision_free,
    prac_plan,
    round_to_lattice,
)
from .smoothing import dag_smooth, sample_waypoints

__all__ = [name for name in dir() if not name.startswith("_")]
