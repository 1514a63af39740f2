"""Adaptive ResNet tracking-control benchmark: simulate controllers and compare them.

    resnet-adaptive --print-config > bench.cfg
    resnet-adaptive run bench.cfg --controller ResNet --out results/
    resnet-adaptive bench bench.cfg --out results/ [--seed N] [--no-plots]
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import run_benchmark
from .config import ConfigError, parse_config, print_config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="benchmark definition file")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--seed", type=int, default=None, help="override the seeds in the config")
    p.add_argument("--no-plots", action="store_true", help="skip figure generation")
    p.add_argument("--workers", type=int, default=1, help="parallel runs (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resnet-adaptive", description=__doc__.split("\n")[0])
    parser.add_argument("--print-config", action="store_true", help="print a default config and exit")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="simulate one controller")
    _add_common(run)
    run.add_argument("--controller", default=None, help="controller section name (default: first)")
    bench = sub.add_parser("bench", help="simulate every controller and compare")
    _add_common(bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        sys.stdout.write(print_config())
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        spec = parse_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        spec = spec.with_seed(args.seed)

    only = None
    if args.command == "run":
        names = [c.name for c in spec.controllers]
        name = args.controller or names[0]
        if name not in names:
            print(f"error: no controller {name!r}; have {names}", file=sys.stderr)
            return 2
        only = [name]

    result = run_benchmark(spec, args.out, plots=not args.no_plots, workers=args.workers, only=only)
    for label, entry in result.summary["runs"].items():
        if entry["status"] == "failed" or "rms_error" not in entry:
            print(f"{label}: {entry['status']} {entry.get('error', '')}")
            continue
        extra = ""
        if "percent_improvement_rms_error" in entry and not label.startswith(spec.baseline + "_"):
            extra = f"  improvement vs {spec.baseline}: {entry['percent_improvement_rms_error']:.2f}%"
        print(
            f"{label}: rms={entry['rms_error']:.4f} final_window_rms={entry['final_window_rms']:.4f}"
            f" status={entry['status']}{extra}"
        )
    print(f"summary: {result.summary_path}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
