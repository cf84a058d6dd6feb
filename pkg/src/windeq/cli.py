"""Command-line surface tying the pipeline together.

Subcommands::

    cluster         per-turbine cluster labels and critical powers
    boundaries      critical wind-speed curves over a voltage grid
    solve-voltages  per-turbine sequence terminal voltages
    equivalize      reduced farm via the PCC voltage iteration
    simulate        one model's trace (detailed / three-machine / single)
    compare         all three models, wall times and RMS errors

All outputs land in the directory given by ``--out`` (default ``out``);
nothing else is written.  Exit codes: 0 success, 1 usage, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import clustering, farmio
from .engine import Model, compare_models, simulate
from .errors import (
    NonRadialTopology,
    OutOfRange,
    ParseError,
    ValidationError,
    WindeqError,
)
from .grid import iterate_pcc_voltage, solve_clustering_indicators
from .pmsg import PmsgParams, Strategy

_USAGE_EXIT = 1
_VALIDATION_EXIT = 2
_NUMERICAL_EXIT = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windeq",
        description="PMSG wind-farm simulation and dynamic equivalencing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario_required=True):
        p.add_argument(
            "--scenario", type=Path, required=scenario_required,
            help="scenario JSON file",
        )
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for generated test farms")
        p.add_argument("--sigma1", type=float, default=None, help="inner voltage tolerance")
        p.add_argument("--sigma2", type=float, default=None, help="PCC iteration tolerance")
        p.add_argument("--step", type=float, default=None, help="simulation step size (s)")

    add_common(sub.add_parser("cluster", help="emit per-turbine cluster assignments"))

    p_bound = sub.add_parser("boundaries", help="emit clustering boundary curves")
    add_common(p_bound, scenario_required=False)
    p_bound.add_argument("--strategy", type=int, choices=(1, 2), default=1)
    p_bound.add_argument("--u-neg", type=float, default=0.2)
    p_bound.add_argument("--u-pos-min", type=float, default=0.25)
    p_bound.add_argument("--u-pos-max", type=float, default=1.0)
    p_bound.add_argument("--points", type=int, default=50)

    p_solve = sub.add_parser("solve-voltages", help="emit terminal-voltage solution")
    add_common(p_solve)
    p_solve.add_argument(
        "--u-pos", type=float, default=None,
        help="PCC positive-sequence magnitude (default: converged fault-on value)",
    )
    p_solve.add_argument("--u-neg", type=float, default=None)

    add_common(sub.add_parser("equivalize", help="build the reduced farm"))

    p_sim = sub.add_parser("simulate", help="run one model and emit its trace")
    add_common(p_sim)
    p_sim.add_argument("--model", choices=[m.value for m in Model], default="dm")

    add_common(sub.add_parser("compare", help="run and compare all three models"))
    return parser


def _load_scenario(args):
    scenario = farmio.load_scenario(args.scenario, seed=args.seed)
    overrides = {}
    if args.sigma1 is not None:
        overrides["sigma1"] = args.sigma1
    if args.sigma2 is not None:
        overrides["sigma2"] = args.sigma2
    if args.step is not None:
        overrides["h"] = args.step
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    return scenario


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _cmd_cluster(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    result, _ = iterate_pcc_voltage(scenario)
    _, assignments = solve_clustering_indicators(
        scenario, abs(result.u_pcc_pos), abs(result.u_pcc_neg)
    )
    path = out / "assignments.csv"
    farmio.write_assignments_csv(assignments, path)
    counts = {c.value: 0 for c in clustering.Cluster}
    for a in assignments:
        counts[a.cluster.value] += 1
    print(f"wrote {path}")
    print(
        "clusters: "
        + ", ".join(f"{name}={count}" for name, count in counts.items())
    )
    return 0


def _cmd_boundaries(args) -> int:
    if args.scenario is not None:
        scenario = _load_scenario(args)
        first = scenario.farm.turbine_ids[0]
        params = scenario.farm.params[first]
    else:
        params = PmsgParams()
    strategy = Strategy(args.strategy)
    u_values = np.linspace(args.u_pos_min, args.u_pos_max, args.points)
    rows = clustering.boundary_surface(strategy, args.u_neg, u_values.tolist(), params)
    out = _outdir(args)
    path = out / "boundaries.csv"
    farmio.write_boundary_csv(rows, path)
    print(f"wrote {path}")
    return 0


def _cmd_solve_voltages(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    if args.u_pos is None or args.u_neg is None:
        result, _ = iterate_pcc_voltage(scenario)
        u_pos, u_neg = abs(result.u_pcc_pos), abs(result.u_pcc_neg)
    else:
        u_pos, u_neg = args.u_pos, args.u_neg
    solution, _ = solve_clustering_indicators(scenario, u_pos, u_neg)
    path = out / "voltages.csv"
    farmio.write_voltages_csv(solution, path)
    print(f"wrote {path} (PCC: U+={u_pos:.4f}, U-={u_neg:.4f})")
    return 0


def _cmd_equivalize(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    result, eq_farm = iterate_pcc_voltage(scenario)
    farm_path = out / "equivalent_farm.json"
    iter_path = out / "pcc_iterations.csv"
    farmio.save_equivalent_farm(eq_farm, farm_path)
    farmio.write_iterations_csv(result.history, iter_path)
    print(f"wrote {farm_path} and {iter_path}")
    print(
        f"converged in {result.iterations} iteration(s): "
        f"U+={abs(result.u_pcc_pos):.4f}, U-={abs(result.u_pcc_neg):.4f}"
    )
    return 0


def _cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    model = Model(args.model)
    trace = simulate(model, scenario)
    path = out / f"trace_{model.value}.csv"
    trace.to_csv(path)
    print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    report, _ = compare_models(scenario, out_dir=out)
    path = out / "report.json"
    farmio.save_report(report, path)
    print(f"wrote {path}")
    for run in report.runs:
        rmse = "reference" if run.rmse_p_pct is None else f"RMSE P {run.rmse_p_pct:.2f} %"
        print(f"  {run.model}: {run.wall_time_s:.2f} s, {rmse}")
    return 0


_COMMANDS = {
    "cluster": _cmd_cluster,
    "boundaries": _cmd_boundaries,
    "solve-voltages": _cmd_solve_voltages,
    "equivalize": _cmd_equivalize,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else _USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError, NonRadialTopology, OutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _VALIDATION_EXIT
    except WindeqError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _NUMERICAL_EXIT


def cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli()
