"""Command-line interface.

Subcommands: gen-data, train, eval, sweep, report, stats, print-config.
Exit codes: 0 success, 1 partial sweep failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .commands import (
    SWEEP_AXES,
    CommandError,
    cmd_eval,
    cmd_gen_data,
    cmd_print_config,
    cmd_report,
    cmd_stats,
    cmd_sweep,
    cmd_train,
)
from .config import ConfigError, load_config

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajicl",
        description="Desk-scale in-context imitation learning experiments.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML run config (defaults when omitted)")
        p.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker hint; cells run sequentially at 1")
        return p

    common(sub.add_parser("gen-data", help="collect expert datasets for the train tasks"))

    p = common(sub.add_parser("train", help="train policy model(s)"))
    p.add_argument("--seeds", default=None,
                   help="comma-separated model seeds (default: single train.seed)")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")

    p = common(sub.add_parser("eval", help="evaluate a policy or baseline on the test tasks"))
    p.add_argument("--checkpoints", default=None,
                   help="directory holding train-seed*/ckpt-final.bin (default: out dir)")

    p = common(sub.add_parser("sweep", help="run one experiment axis end to end"))
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", default=None,
                   help="YAML list of axis values, e.g. '[0.0, 0.6, 1.0]'")

    p = sub.add_parser("report", help="aggregate run outputs into plot-ready CSVs")
    p.add_argument("run_dirs", nargs="+", help="completed run directories")
    p.add_argument("--out", required=True, help="directory for aggregate CSVs")

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("datasets", nargs="+", help="dataset .traj files")

    common(sub.add_parser("print-config", help="print the effective configuration"))
    return parser


_DEFAULT_SWEEP_VALUES = {
    "burstiness": [0.0, 0.6, 1.0],
    "dataset_size": [100, 250, 500],
    "model_size": ["tiny", "small"],
    "task_diversity": [1, 2, 4],
    "stochasticity_matrix": [],
    "k_shot": [0, 1, 3, 5],
    "reward_tokens": [False, True],
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "stats":
            print(cmd_stats(args.datasets))
            return 0
        if args.command == "report":
            written = cmd_report(args.run_dirs, args.out)
            for p in written:
                print(p)
            return 0

        cfg = load_config(args.config)
        if args.out is not None:
            import dataclasses
            cfg = dataclasses.replace(cfg, out_dir=args.out)
        if args.seed is not None:
            import dataclasses
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=args.seed))

        if args.command == "print-config":
            print(cmd_print_config(cfg), end="")
            return 0
        if args.command == "gen-data":
            out = cmd_gen_data(cfg)
            print(out)
            return 0
        if args.command == "train":
            seeds = None
            if args.seeds is not None:
                seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            paths = cmd_train(cfg, seeds=seeds, resume=args.resume)
            for p in paths:
                print(p)
            return 0
        if args.command == "eval":
            reports = cmd_eval(cfg, checkpoint_dir=args.checkpoints)
            for task, report in reports.items():
                for e in report.entries:
                    print(f"{task} k={e.k}: {e.mean_return:.3f} +- {e.std_return:.3f}")
            return 0
        if args.command == "sweep":
            values = yaml.safe_load(args.values) if args.values else _DEFAULT_SWEEP_VALUES[args.axis]
            if not isinstance(values, list):
                raise ConfigError(f"--values must be a YAML list, got {values!r}")
            failures = cmd_sweep(cfg, args.axis, values)
            return 1 if failures else 0
        raise ConfigError(f"unhandled command {args.command}")
    except (ConfigError, CommandError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
