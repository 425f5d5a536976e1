"""Command-line entry points: simulate, ensemble, calibrate, analyze, sweep.

Every command takes an explicit seed and records it in its outputs; given
the same scenario, seed and worker count the outputs are bit-identical.
"""

from __future__ import annotations

import argparse
import functools
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, calibrate as _calibrate, engine, scenario_io
from .engine import EnsembleConfig


def _simulate_run(scenario_path: str, days: float, workers: int, save_snapshot: bool,
                  run_idx: int, seed: int, out_dir=None):
    world = scenario_io.load_scenario(scenario_path, run_key=seed)
    result = engine.simulate(world, days=days, workers=workers, out_dir=out_dir)
    if out_dir is not None and save_snapshot:
        scenario_io.save_world(world, Path(out_dir) / "world.pkl")
    result.world = None  # keep ensemble gather light
    return result


def _ensemble_runner(scenario_path: str, days: float, workers: int, out_dir: str,
                     save_snapshot: bool, run_idx: int, seed: int):
    run_dir = None if out_dir is None else Path(out_dir) / f"run_{run_idx:03d}"
    return _simulate_run(scenario_path, days, 1, save_snapshot, run_idx, seed, run_dir)


def cmd_simulate(args) -> int:
    world = scenario_io.load_scenario(args.scenario, run_key=args.seed)
    engine.simulate(world, days=args.days, workers=args.workers,
                    out_dir=args.out, check_consistency=args.check)
    if args.out:
        scenario_io.save_world(world, Path(args.out) / "world.pkl")
    print(f"simulated {args.days} days, seed {args.seed} -> {args.out}")
    return 0


def cmd_ensemble(args) -> int:
    config = EnsembleConfig(runs=args.runs, master_seed=args.seed, workers=args.workers)
    runner = functools.partial(_ensemble_runner, args.scenario, args.days, 1,
                               args.out, args.snapshots)
    results, summary = engine.run_ensemble(runner, config, out_dir=args.out)
    failures = summary["errors"]
    print(f"{len(results) - len(failures)}/{args.runs} runs ok -> {args.out}")
    for idx, err in failures.items():
        print(f"run {idx} FAILED:\n{err}", file=sys.stderr)
    return 1 if failures else 0


def simulated_triple(result: engine.RunResult, n_days: int):
    """(cumulative deaths, daily ICU, cumulative detected) daily series."""
    return (result.daily("deaths_cum")[:n_days],
            result.daily("icu_occupancy")[:n_days],
            result.daily("detected_cum")[:n_days])


def reported_triple(reported: scenario_io.ReportedData, n_days: int):
    sel = (reported.days >= 0) & (reported.days < n_days)
    return (reported.cum_deaths[sel], reported.icu[sel],
            reported.cum_cases[sel].sum(axis=1))


def _calibration_objective(scenario_path: str, days: float, weights, reported_path: str,
                           params_dict: dict, seed: int) -> float:
    reported = scenario_io.ReportedData.from_csv(reported_path)
    world = scenario_io.load_scenario(scenario_path, run_key=seed, fit_overrides=params_dict)
    result = engine.simulate(world, days=days)
    n_days = int(days)
    return _calibrate.weighted_mse(simulated_triple(result, n_days),
                                   reported_triple(reported, n_days), weights)


def cmd_calibrate(args) -> int:
    with open(args.space) as fh:
        space_doc = json.load(fh)
    space = _calibrate.FitSpace(tuple(_calibrate.FitDim(**d) for d in space_doc["dims"]))
    weights = tuple(space_doc.get("weights", _calibrate.DEFAULT_WEIGHTS))
    days = float(space_doc.get("days", args.days))
    reported = space_doc.get("reported")
    if reported is None:
        raise SystemExit("space file must name the reported-data CSV")
    reported = str((Path(args.space).parent / reported).resolve())
    evaluate = functools.partial(_calibration_objective, args.scenario, days, weights, reported)
    out_csv = Path(args.out) / "ranked.csv" if args.out else None
    result = _calibrate.grid_search(evaluate, space, runs_per_point=args.runs_per_point,
                                    master_seed=args.seed, workers=args.workers,
                                    out_csv=out_csv)
    print("best:", json.dumps(result.best_params), "mse:", result.best_score)
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_dirs = sorted(p for p in Path(args.runs).glob("run_*") if p.is_dir())
    if not run_dirs:
        run_dirs = [Path(args.runs)]
    if args.endpoints:
        rows = []
        for rd in run_dirs:
            result = engine.read_run_csvs(rd)
            outcome = analysis.aggregate(result)
            rows.append((rd.name, outcome))
        with open(out / "endpoints.csv", "w") as fh:
            fh.write("run," + ",".join(analysis.RunOutcome.ENDPOINTS) + "\n")
            for name, oc in rows:
                fh.write(name + "," + ",".join(format(getattr(oc, e), ".10g")
                                               for e in analysis.RunOutcome.ENDPOINTS) + "\n")
        print(f"endpoints for {len(rows)} runs -> {out/'endpoints.csv'}")
    if args.rt:
        for rd in run_dirs:
            snap = rd / "world.pkl"
            if not snap.exists():
                print(f"{rd}: no world.pkl snapshot, skipping Rt", file=sys.stderr)
                continue
            world = scenario_io.load_world(snap)
            times, values = analysis.rt_series(world, t_end=world.t_days)
            with open(out / f"rt_{rd.name}.csv", "w") as fh:
                fh.write("time,value\n")
                for t, v in zip(times, values):
                    fh.write(f"{format(t, '.10g')},{format(v, '.10g')}\n")
        print(f"rt series -> {out}")
    return 0


def _sweep_builder(scenario_path: str, days: float, x_name: str, y_name: str,
                   x: float, y: float, run_idx: int, seed: int) -> analysis.RunOutcome:
    world = scenario_io.load_scenario(scenario_path, run_key=seed,
                                      fit_overrides={x_name: x, y_name: y})
    result = engine.simulate(world, days=days)
    result.world = None
    return analysis.aggregate(result)


def cmd_sweep(args) -> int:
    xs = [float(v) for v in args.grid_x.split(",")]
    ys = [float(v) for v in args.grid_y.split(",")]
    builder = functools.partial(_sweep_builder, args.scenario, args.days,
                                args.param_x, args.param_y)
    matrices = analysis.sweep(builder, xs, ys, runs=args.runs,
                              master_seed=args.seed, workers=args.workers)
    analysis.write_outcomes_csv(args.out, matrices, args.param_x, args.param_y)
    print(f"sweep {args.param_x} x {args.param_y} -> {args.out}")
    if matrices["errors"]:
        for key, err in matrices["errors"].items():
            print(f"cell {key} FAILED: {err}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tripsim",
                                     description="Trip-based epidemic agent simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=float, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--check", action="store_true", help="verify invariants every step")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("ensemble", help="run independent seeded simulations")
    p.add_argument("--scenario", required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshots", action="store_true", help="save world.pkl per run")
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("calibrate", help="two-stage grid search against reported data")
    p.add_argument("--scenario", required=True)
    p.add_argument("--space", required=True, help="JSON fit-space file")
    p.add_argument("--runs-per-point", type=int, default=11)
    p.add_argument("--days", type=float, default=90.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("analyze", help="endpoints and Rt from run outputs")
    p.add_argument("--runs", required=True)
    p.add_argument("--rt", action="store_true")
    p.add_argument("--endpoints", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("sweep", help="two-parameter endpoint sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param-x", required=True, choices=sorted(_calibrate.FIT_SETTERS))
    p.add_argument("--param-y", required=True, choices=sorted(_calibrate.FIT_SETTERS))
    p.add_argument("--grid-x", required=True, help="comma-separated values")
    p.add_argument("--grid-y", required=True, help="comma-separated values")
    p.add_argument("--runs", type=int, default=11)
    p.add_argument("--days", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
