"""Command-line pipeline: build, solve, plan, smooth, verify.

Exit codes: 0 success, 2 input error, 3 solver budget exhausted or
infeasible, 4 no path found.  Timing is reported on stderr; files on disk
zero their wall-clock fields so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

from ..lattice import (
    LatticeError,
    LatticeSpec,
    artifact_from_dict,
    artifact_to_dict,
    add_reverse_primitives,
    build_lattice,
    build_primitive_library,
    lattice_hash,
    prune,
    PrimitiveLibrary,
)
from ..mtscs import (
    BudgetExhaustedError,
    MtscsError,
    UnspannableError,
    build_assignment,
    build_milp,
    control_set_from_dict,
    control_set_to_dict,
    decode_certificate,
    export_lp,
    solve_mtscs,
    t_error,
)
from ..planner import (
    NoPathError,
    OffLatticeError,
    PlannerError,
    Scenario,
    build_offlattice_set,
    plan_result_from_dict,
    prac_plan,
)
from ..smoothing import dag_smooth
from ..steering import SteeringConfig
from .metrics import metrics_csv, metrics_for
from .svg import scene_svg

OK, INPUT_ERROR, SOLVER_LIMIT, NO_PATH = 0, 2, 3, 4

LP_SOLVER_ENV = "LATTICEPLAN_LP_SOLVER"


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise SystemExit2(f"cannot read {path}: {err}")


class SystemExit2(Exception):
    """Input-level failure mapped to exit code 2."""


def _write_text(path, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _write_json(path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    doc = _read_json(args.spec)
    try:
        spec = LatticeSpec.from_dict(doc)
        steering = SteeringConfig.from_dict(doc.get("steering", doc))
    except (KeyError, ValueError, TypeError) as err:
        raise SystemExit2(f"invalid lattice spec: {err}")

    began = time.perf_counter()
    lat = build_lattice(spec)
    lib = build_primitive_library(lat, steering)
    pruned_count = 0
    if spec.prune_ratio is not None:
        lat = prune(lat, lib, spec.prune_ratio)
        lib = lib.restrict(lat)
        pruned_count = len(lat.pruned)
    _write_json(args.out, artifact_to_dict(lat, lib, steering))
    _log(f"build: {time.perf_counter() - began:.2f}s")
    print(f"vertices: {lat.num_vertices}")
    print(f"active: {len(lat.active_ids())}")
    print(f"starts: {lat.num_starts}")
    print(f"pruned: {pruned_count}")
    print(f"primitives: {sum(len(t) for t in lib.forward.values())}")
    return OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    lat, lib, steering = _load_artifact(args.artifact)
    if args.t < 1.0:
        raise SystemExit2("stretch factor t must be >= 1")

    began = time.perf_counter()
    status = OK
    try:
        cs, cert = solve_mtscs(lat, lib, args.t, node_budget=args.budget,
                               objective_mode=args.objective)
    except BudgetExhaustedError as err:
        cs, cert = err.incumbent, err.certificate
        status = SOLVER_LIMIT
        _log(f"solve: budget exhausted after {err.nodes} nodes; saving incumbent")
    except UnspannableError as err:
        _log(f"solve: infeasible at t={args.t}: {err}")
        return SOLVER_LIMIT
    _log(f"solve: {time.perf_counter() - began:.2f}s")

    if args.add_reverse:
        cs.reverse = add_reverse_primitives(
            PrimitiveLibrary({sid: dict(t) for sid, t in cs.per_start.items()}),
            lat, steering,
        ).reverse

    doc = control_set_to_dict(cs, lat, steering)
    doc["solver"]["wall_time"] = 0.0
    _write_json(args.out, doc)
    print(f"objective: {cs.objective}")
    print(f"t_error: {cs.achieved_t_error:.9f}")
    print(f"proven_optimal: {cs.solver['proven_optimal']}")

    if args.export_lp:
        model = build_milp(lat, lib, args.t, steering)
        _write_text(args.export_lp, export_lp(model))
        print(f"lp: {args.export_lp}")
        template = os.environ.get(LP_SOLVER_ENV)
        if template:
            value = _external_lp_objective(template, args.export_lp)
            if value is not None:
                print(f"external_objective: {value}")
    return status


def _external_lp_objective(template: str, lp_path: str):
    """Run the configured solver command on the LP file and scrape the last
    number on a line mentioning 'objective'."""
    cmd = template.format(lp=lp_path)
    try:
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=600)
    except (OSError, subprocess.TimeoutExpired) as err:
        _log(f"external solver failed: {err}")
        return None
    value = None
    for line in proc.stdout.splitlines():
        if "objective" in line.lower():
            for token in reversed(line.replace("=", " ").split()):
                try:
                    value = float(token)
                    break
                except ValueError:
                    continue
            if value is not None:
                break
    return value


def _load_artifact(path):
    doc = _read_json(path)
    try:
        return artifact_from_dict(doc)
    except (KeyError, ValueError, LatticeError) as err:
        raise SystemExit2(f"invalid artifact: {err}")


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

def cmd_plan(args) -> int:
    cs_doc = _read_json(args.control_set)
    try:
        cs, lat, steering = control_set_from_dict(cs_doc)
    except (KeyError, ValueError) as err:
        raise SystemExit2(f"invalid control set: {err}")

    if args.artifact:
        art = _read_json(args.artifact)
        if art.get("hash") != cs.lattice_hash:
            raise SystemExit2("control set was built from a different lattice artifact")

    sc_doc = _read_json(args.scenario)
    try:
        sc = Scenario.from_dict(sc_doc)
    except (KeyError, ValueError, PlannerError) as err:
        raise SystemExit2(f"invalid scenario: {err}")
    if args.lam is not None:
        sc.lam = args.lam

    off = None
    if lat.id_of(sc.start) is None or lat.id_of(sc.goal) is None:
        if not sc.tolerances:
            raise SystemExit2("off-lattice endpoints need scenario tolerances")
        off = build_offlattice_set(lat, cs, sc.tolerances, steering)

    began = time.perf_counter()
    try:
        planned = prac_plan(sc, cs, lat, steering, off=off)
    except NoPathError as err:
        _log("plan: no path found")
        if args.svg:
            _write_text(args.svg, scene_svg(sc, explored=err.stats.explored_edges))
        return NO_PATH
    except (OffLatticeError, PlannerError) as err:
        raise SystemExit2(f"planning failed: {err}")
    plan_time = time.perf_counter() - began

    began = time.perf_counter()
    smoothed = dag_smooth(planned, sc, steering, n=args.n, seed=args.seed)
    smooth_time = time.perf_counter() - began
    _log(f"plan: {plan_time:.2f}s search, {smooth_time:.2f}s smoothing")

    planned_metrics = metrics_for(planned, expansions=planned.stats.expansions)
    smoothed_metrics = metrics_for(smoothed, expansions=planned.stats.expansions)

    planned_doc = planned.to_dict()
    smoothed_doc = smoothed.to_dict()
    for doc in (planned_doc, smoothed_doc):
        doc["stats"]["wall_time"] = 0.0
    result_doc = {
        "format": "latticeplan-result/1",
        "steering": steering.to_dict(),
        "scenario": sc.to_dict(),
        "lambda": sc.lam,
        "seed": args.seed,
        "smoothing_samples": args.n,
        "control_set_hash": cs.lattice_hash,
        "planned": planned_doc,
        "smoothed": smoothed_doc,
        "metrics": {
            "planned": planned_metrics.to_dict(),
            "smoothed": smoothed_metrics.to_dict(),
        },
    }
    _write_json(args.out, result_doc)
    if args.csv:
        _write_text(args.csv, metrics_csv(planned_metrics, smoothed_metrics))
    if args.svg:
        _write_text(args.svg, scene_svg(sc, planned=planned, smoothed=smoothed))
    print(f"planned_cost: {planned.cost:.9f}")
    print(f"smoothed_cost: {smoothed.cost:.9f}")
    print(f"expansions: {planned.stats.expansions}")
    return OK


# ---------------------------------------------------------------------------
# smooth
# ---------------------------------------------------------------------------

def cmd_smooth(args) -> int:
    doc = _read_json(args.result)
    try:
        steering = SteeringConfig.from_dict(doc["steering"])
        base = plan_result_from_dict(doc.get("planned", doc), steering)
    except (KeyError, ValueError) as err:
        raise SystemExit2(f"invalid result file: {err}")
    sc_doc = _read_json(args.scenario)
    try:
        sc = Scenario.from_dict(sc_doc)
    except (KeyError, ValueError, PlannerError) as err:
        raise SystemExit2(f"invalid scenario: {err}")

    smoothed = dag_smooth(base, sc, steering, n=args.n, seed=args.seed)
    out_doc = dict(doc)
    smoothed_doc = smoothed.to_dict()
    smoothed_doc["stats"]["wall_time"] = 0.0
    out_doc["smoothed"] = smoothed_doc
    out_doc["seed"] = args.seed
    out_doc["smoothing_samples"] = args.n
    planned_metrics = metrics_for(base, expansions=base.stats.expansions)
    smoothed_metrics = metrics_for(smoothed, expansions=base.stats.expansions)
    out_doc["metrics"] = {
        "planned": planned_metrics.to_dict(),
        "smoothed": smoothed_metrics.to_dict(),
    }
    _write_json(args.out, out_doc)
    print(f"smoothed_cost: {smoothed.cost:.9f}")
    return OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    doc = _read_json(args.control_set)
    try:
        cs, lat, steering = control_set_from_dict(doc)
    except (KeyError, ValueError) as err:
        raise SystemExit2(f"invalid control set: {err}")

    lib = build_primitive_library(lat, steering)
    achieved = t_error(cs, lat, lib)
    spans = achieved <= cs.t + 1e-9
    stored_matches = abs(achieved - cs.achieved_t_error) <= 1e-9
    print(f"t_error: {achieved:.9f} (stored {cs.achieved_t_error:.9f})")
    print(f"spans_at_t: {spans}")

    assignment = build_assignment(cs, lat, lib, cs.t, steering)
    try:
        decode_certificate(assignment, lat, lib, cs.t)
        cert_ok = True
    except MtscsError as err:
        cert_ok = False
        _log(f"certificate check failed: {err}")
    print(f"certificate: {'ok' if cert_ok else 'invalid'}")
    return OK if (spans and stored_matches and cert_ok) else INPUT_ERROR


# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticeplan",
        description="Lattice motion planning with minimum t-spanning control sets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a lattice + primitive library artifact")
    p.add_argument("--spec", required=True, help="lattice spec JSON")
    p.add_argument("--out", required=True, help="artifact JSON path")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("solve", help="compute a minimum t-spanning control set")
    p.add_argument("--artifact", required=True)
    p.add_argument("--t", type=float, default=1.1, help="stretch factor (default 1.1)")
    p.add_argument("--out", required=True)
    p.add_argument("--objective", choices=("max", "sum"), default="max")
    p.add_argument("--budget", type=int, default=None, help="search node limit")
    p.add_argument("--add-reverse", action="store_true",
                   help="augment the solution with reverse primitives")
    p.add_argument("--export-lp", default=None, help="also write the MILP in LP format")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("plan", help="plan and smooth a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--control-set", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--artifact", default=None, help="cross-check lattice hash")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--n", type=int, default=0, help="extra smoothing waypoints")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("smooth", help="re-smooth a stored plan result")
    p.add_argument("--scenario", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_smooth)

    p = sub.add_parser("verify", help="re-check a control set's t-error and certificate")
    p.add_argument("--control-set", required=True)
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit2 as err:
        _log(str(err))
        return INPUT_ERROR
    except LatticeError as err:
        _log(str(err))
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
