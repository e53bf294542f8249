"""Command line interface: ``cradl gendata|run|sweep|verify|theory|plot``.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 the run finished but diverged.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, problem
from .aggregation import InfeasibleRule
from .allocation import AllocationError
from .trainer import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_DIVERGED = 0, 1, 2, 3


def _load(args) -> harness.Experiment:
    if args.config is None:
        raise harness.ConfigFileError("--config is required")
    exp = harness.load_experiment(args.config)
    if getattr(args, "seed", None) is not None:
        exp = replace(exp, run=replace(exp.run, seed=args.seed))
    return exp


def _out(args, exp, default: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    if exp is not None and exp.out is not None:
        return exp.out
    return Path(default)


def cmd_gendata(args) -> int:
    if args.config is not None:
        exp = _load(args)
        m, D, sigma_h, seed = exp.m, exp.D, exp.sigma_h, exp.run.seed if exp.data_seed is None else exp.data_seed
    else:
        exp = None
        m, D, sigma_h, seed = args.m, args.D, args.sigma_h, args.seed or 0
    data = problem.generate_dataset(m, D, sigma_h, seed)
    out = _out(args, None, "dataset.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    problem.save_dataset(data, out)
    print(f"wrote {data.m} points of dimension {data.dimension} to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    exp = _load(args)
    traj, rows = harness.run_experiment(exp)
    out = _out(args, exp, "run.csv")
    harness.write_rows(rows, out)
    status = "diverged" if traj.diverged else f"final loss {traj.final_loss:.6g}"
    print(f"{traj.config.label}: {len(rows)} iterations, {status} -> {out}")
    return EXIT_DIVERGED if traj.diverged else EXIT_OK


def cmd_sweep(args) -> int:
    if args.figure is not None:
        overrides = {}
        if args.T is not None:
            overrides["T"] = str(args.T)
        seeds = tuple(range(args.seeds)) if args.seeds is not None else (0, 1, 2, 3, 4)
        exp = harness.figure_experiment(args.figure, seeds=seeds, overrides=overrides)
        default = f"{args.figure}.csv"
    else:
        exp = _load(args)
        if args.seed is not None:
            exp = replace(exp, seeds=(args.seed,))
        default = "sweep.csv"
    if not exp.sweep and not exp.seeds:
        raise harness.ConfigFileError("sweep needs a [sweep] section")

    def progress(run_id, traj):
        print(f"  {run_id} {traj.config.label} alpha={traj.config.alpha:g} r={traj.config.r} seed={traj.config.seed}: "
              f"final loss {traj.final_loss:.6g}", flush=True)

    result = harness.run_sweep(exp, progress=None if args.quiet else progress)
    out = _out(args, exp, default)
    harness.write_sweep(result, out)
    print(f"{len(result.trajectories)} runs, {len(result.skipped)} skipped -> {out}")
    if args.plot:
        svg = harness.plot_csv(out, out.with_suffix(".svg"), title=args.figure)
        print(f"plot -> {svg}")
    return EXIT_DIVERGED if result.diverged else EXIT_OK


def cmd_verify(args) -> int:
    results = harness.verify_suite(quick=args.quick)
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}: {res.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_theory(args) -> int:
    exp = _load(args)
    rows = harness.theory_table(exp)
    out = _out(args, None, "theory.csv")
    harness.write_rows(rows, out, ("name", "value", "note"))
    for row in rows:
        print(f"{row['name']:>24} = {row['value']!r} {row['note']}")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.csv is None:
        raise harness.ConfigFileError("--csv is required")
    csv_path = Path(args.csv)
    if not csv_path.exists():
        raise harness.ConfigFileError(f"{csv_path}: no such file")
    out = Path(args.out) if args.out else csv_path.with_suffix(".svg")
    harness.plot_csv(csv_path, out, title=args.figure)
    print(f"plot -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cradl", description="Coded robust aggregation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="experiment file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("gendata", help="generate a synthetic dataset file")
    common(p)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--D", type=int, default=100)
    p.add_argument("--sigma-h", type=float, default=0.0)
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("run", help="run one configuration and write its CSV")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a sweep or a figure reproduction")
    common(p)
    p.add_argument("--figure", choices=sorted(harness.FIGURES))
    p.add_argument("--seeds", type=int, help="number of seeds for --figure (default 5)")
    p.add_argument("--T", type=int, help="iterations for --figure (default 500)")
    p.add_argument("--plot", action="store_true", help="also write an SVG next to the CSV")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant suite")
    common(p, config=False)
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("theory", help="constants and bounds for a configuration")
    common(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("plot", help="plot a results CSV as SVG")
    common(p, config=False)
    p.add_argument("--csv", help="results CSV")
    p.add_argument("--figure", help="title for the chart")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigFileError, ConfigError, InfeasibleRule, AllocationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
