"""Command line entry point.

Subcommands mirror the experiment modes: census, path, limit, compare,
invariants. Every run needs a config file; seed, output directory and
worker count can be overridden on the command line. The invariants
subcommand exits nonzero when any check fails.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .harness import HarnessError, emit_outputs, run_experiment

_MODES = ("census", "path", "limit", "compare", "invariants")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critrank1",
        description="Critical rank-1 random graph exploration experiments",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _MODES:
        p = sub.add_parser(mode, help=f"run a {mode} experiment")
        p.add_argument("--config", required=True, help="path to the experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing output files")
        p.add_argument("--allow-noncritical", action="store_true",
                       help="accept a type law with E X^2 != 1 in compare mode")
        p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "mode": args.mode,
        "seed": args.seed,
        "out_dir": args.out,
        "workers": args.workers,
    }
    if args.allow_noncritical:
        overrides["allow_noncritical"] = True
    try:
        config = load_config(args.config, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    report = run_experiment(config)
    for line in report.log_lines:
        print(line)

    out_dir = config.out_dir
    if out_dir is not None:
        try:
            written = emit_outputs(report, out_dir, force=args.force)
        except HarnessError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        for path in written:
            print(f"wrote {path}")
    elif report.tables:
        print("note: no output directory configured (use --out or 'out =' in the config)")

    if config.mode == "invariants" and not report.summary.get("passed", False):
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
