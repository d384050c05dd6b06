"""Command-line entry point.

``run <config> [--out DIR] [--jobs N] [--seed S]`` executes an experiment
file; ``trace`` dumps the convergence history of one instance. Exit codes:
0 on success, 2 for configuration or argument errors, 3 when a solve
diverged (partial results are still written).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from .bench import ConfigError, load_config, run_experiment
from .csit import egfp_solve_imperfect, gen_imperfect_channel
from .egfp import EgfpConfig, solve
from .extragradient import DivergenceError, EgConfig
from .model import SystemConfig, gen_channel, load_channel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsma-egfp", description="EG-FP beamforming experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment configuration file")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--seed", type=int, default=None, help="override base_seed")

    tr = sub.add_parser("trace", help="convergence history of one instance")
    tr.add_argument("--K", type=int, default=4)
    tr.add_argument("--Nt", type=int, default=16)
    tr.add_argument("--snr-db", type=float, default=10.0)
    tr.add_argument("--kappa", type=float, default=0.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--variant", choices=("full", "lowdim"), default="full")
    tr.add_argument("--sdma", action="store_true", help="disable the common stream")
    tr.add_argument("--channel", help="channel file (overrides --K/--Nt/--seed)")
    tr.add_argument("--inner", action="store_true",
                    help="dump inner extragradient rows instead of outer iterations")
    tr.add_argument("--outer-tol", type=float, default=1e-3)
    tr.add_argument("--inner-tol", type=float, default=1e-3)
    tr.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    result = run_experiment(cfg, args.out, args.jobs, args.seed)
    for path in result.paths.values():
        print(path)
    if result.failures:
        print(f"{len(result.failures)} run(s) diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_trace(args) -> int:
    if not 0.0 <= args.kappa < 1.0:
        raise ConfigError("--kappa must lie in [0, 1)")
    cfg = EgfpConfig(outer_tol=args.outer_tol, variant=args.variant,
                     eg=replace(EgConfig(), inner_tol=args.inner_tol))
    common = not args.sdma
    if args.channel:
        try:
            ch = load_channel(args.channel)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load channel: {exc}") from None
        power = 10.0 ** (args.snr_db / 10.0)
        report = solve(ch, power, cfg, None, common)
    else:
        sys_cfg = SystemConfig.from_snr_db(args.K, args.Nt, args.snr_db)
        if args.kappa > 0:
            ics = gen_imperfect_channel(sys_cfg, args.kappa, args.seed)
            report = egfp_solve_imperfect(ics, sys_cfg.tx_power, cfg, args.seed, common)
        else:
            report = solve(gen_channel(sys_cfg, args.seed), sys_cfg.tx_power, cfg,
                           args.seed, common)
    if args.inner:
        header = ["outer_iteration", "iteration", "inner_obj", "alpha", "h_norm"]
        rows = [[m, *row] for m, tr in enumerate(report.inner_traces, 1) for row in tr]
    else:
        header = ["iteration", "outer_obj", "mmf_opt", "surrogate_start",
                  "surrogate_end", "inner_iters", "accepted"]
        rows = [[e[c] for c in header] for e in report.trace]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_trace(args)
    except ConfigError as exc:
        print(f"rsma-egfp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"rsma-egfp: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
