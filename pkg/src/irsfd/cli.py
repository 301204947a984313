"""Command-line entry point.

Subcommands: `solve` (one optimization run), `sweep` (experiment families to
CSV), `validate` (config checking), `selftest` (fast oracle suite).  Human
output goes to stdout; machine output only to files.  Exit codes: 0 success,
1 config error, 2 solver error, 3 sweep completed with errored records.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .channelgen import RngSeed, generate_channels
from .configio import load_experiment, load_scenario
from .harness import run_experiment, write_records
from .model import ConfigError, SolverError
from .orchestrator import Scheme, run_optimization
from .selftest import run_selftest

OUT_DIR_ENV = "IRSFD_OUT_DIR"


def _out_dir(flag_value: str | None) -> str:
    return flag_value or os.environ.get(OUT_DIR_ENV, ".")


def cmd_solve(args) -> int:
    scenario = load_scenario(args.config)
    seed = int(args.seed) if args.seed != "auto" else np.random.SeedSequence().entropy
    rng = RngSeed(int(seed)).generator()
    channels = generate_channels(scenario.geometry, scenario.system, rng)
    result = run_optimization(channels, scenario.system, Scheme(args.scheme),
                              args.duplex, scenario.tolerances)
    print(f"scheme {int(result.scheme)} ({result.duplex}), seed {seed}")
    print(f"SWSR: {result.swsr:.6f} bpcu")
    for k, r in enumerate(result.dl_rates):
        print(f"  DL user {k}: {r:.6f} bpcu")
    for l, r in enumerate(result.ul_rates):
        print(f"  UL user {l}: {r:.6f} bpcu")
    print(f"outer iterations: {result.outer_iterations}, "
          f"wmmse iterations: {result.counters.wmmse_iters}, "
          f"gradient evals: {result.counters.gradient_evals}")
    print(f"wall time: {result.wall_time:.3f} s")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write("step,swsr,dl_sum_rate,ul_sum_rate\n")
            for i, row in enumerate(result.outer_trace):
                fh.write(f"{i},{row[0]:.9g},{row[1]:.9g},{row[2]:.9g}\n")
        print(f"trace written to {args.output}")
    return 0


def cmd_sweep(args) -> int:
    spec = load_experiment(args.spec)
    records = run_experiment(spec, jobs=args.jobs)
    out_dir = _out_dir(args.out)
    tag = args.tag or "run"
    path = os.path.join(out_dir, f"{spec.kind}_{tag}.csv")
    write_records(records, path)
    errored = [r for r in records if r.error]
    print(f"{len(records)} records -> {path}")
    if errored:
        print(f"{len(errored)} records errored; first: {errored[0].error}")
        return 3
    return 0


def cmd_validate(args) -> int:
    try:
        load_experiment(args.config)
        print(f"{args.config}: valid experiment spec")
        return 0
    except ConfigError as exc_experiment:
        try:
            load_scenario(args.config)
            print(f"{args.config}: valid scenario config")
            return 0
        except ConfigError:
            print(f"{args.config}: invalid ({exc_experiment})", file=sys.stderr)
            return 1


def cmd_selftest(args) -> int:
    corrupt = os.environ.get("IRSFD_SELFTEST_CORRUPT", "") == "gradient"
    results = run_selftest(seed=args.seed, corrupt_gradient=corrupt)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(f"{r.name:<{width}}  {r.value:.3e} < {r.threshold:.0e}  {status}")
    print("selftest:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsfd",
        description="Sum-rate optimization for surface-assisted full-duplex systems")
    parser.add_argument("--version", action="version", version=f"irsfd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one optimization")
    p_solve.add_argument("--config", required=True,
                         help="scenario JSON file or preset name (e.g. table1)")
    p_solve.add_argument("--scheme", type=int, default=1, choices=[1, 2, 3, 4])
    p_solve.add_argument("--duplex", default="fd", choices=["fd", "hd"])
    p_solve.add_argument("--seed", default="0", help="integer seed or 'auto'")
    p_solve.add_argument("--output", default=None, help="per-iteration trace CSV")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    p_sweep.add_argument("--spec", required=True, help="experiment spec JSON")
    p_sweep.add_argument("--out", default=None,
                         help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p_sweep.add_argument("--tag", default=None, help="suffix of the CSV filename")
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker count")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="check a config or spec file")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_test = sub.add_parser("selftest", help="run the fast oracle suite")
    p_test.add_argument("--seed", type=int, default=0)
    p_test.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
