#!/usr/bin/env python3
"""Run the full build -> solve -> plan -> smooth pipeline on the bundled
parking-lot and highway-corridor fixtures.

Outputs (artifacts, control sets, result JSON, SVG, CSV) land in out/.
Solver node budgets are deliberately small: the exact search saves its best
incumbent when the budget runs out (exit code 3), which is the expected mode
at these lattice sizes.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from latticeplan.toolchain.cli import main  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]
OUT = ROOT / "out"

FIXTURES = {
    "parking_lot": {"t": 1.1, "budget": 50, "reverse": True, "n": 8, "seed": 7},
    "highway_corridor": {"t": 1.1, "budget": 50, "reverse": False, "n": 0, "seed": 7},
}


def run(label, argv):
    began = time.perf_counter()
    code = main(argv)
    elapsed = time.perf_counter() - began
    print(f"[{label}] exit={code} ({elapsed:.1f}s)")
    return code, elapsed


def pipeline(name, opts):
    spec = ROOT / "scenarios" / f"{name}.spec.json"
    scenario = ROOT / "scenarios" / f"{name}.scenario.json"
    artifact = OUT / f"{name}.artifact.json"
    control = OUT / f"{name}.control.json"
    result = OUT / f"{name}.result.json"

    total = 0.0
    code, dt = run(f"{name}:build", ["build", "--spec", str(spec), "--out", str(artifact)])
    assert code == 0, "build failed"
    total += dt

    solve_args = ["solve", "--artifact", str(artifact), "--t", str(opts["t"]),
                  "--budget", str(opts["budget"]), "--out", str(control)]
    if opts["reverse"]:
        solve_args.append("--add-reverse")
    code, dt = run(f"{name}:solve", solve_args)
    assert code in (0, 3), "solve failed"
    total += dt

    code, dt = run(
        f"{name}:plan",
        ["plan", "--scenario", str(scenario), "--control-set", str(control),
         "--out", str(result), "--svg", str(OUT / f"{name}.svg"),
         "--csv", str(OUT / f"{name}.csv"), "--n", str(opts["n"]),
         "--seed", str(opts["seed"])],
    )
    assert code == 0, "plan failed"
    total += dt

    code, dt = run(
        f"{name}:smooth",
        ["smooth", "--scenario", str(scenario), "--result", str(result),
         "--out", str(OUT / f"{name}.resmoothed.json"),
         "--n", str(opts["n"] + 8), "--seed", str(opts["seed"] + 1)],
    )
    assert code == 0, "smooth failed"
    total += dt
    return total


def main_script():
    OUT.mkdir(exist_ok=True)
    grand = 0.0
    for name, opts in FIXTURES.items():
        print(f"=== {name} ===")
        grand += pipeline(name, opts)
    print(f"total pipeline time: {grand:.1f}s")


if __name__ == "__main__":
    main_script()
