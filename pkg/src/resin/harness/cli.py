"""Command-line entry point: ``resin <experiment> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from ..errors import ConfigError, DomainError, NumericError
from .config import EXPERIMENTS, load_config_file, make_config
from .experiments import RUNNERS, describe, metric_name, write_records

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("resin")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resin",
        description="Run unsupervised input-reconstruction experiments and write CSV results.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", metavar="FILE", help="YAML file of config overrides")
    parser.add_argument("--seed-count", type=int, metavar="N", help="run seeds 0..N-1")
    parser.add_argument("--scale", choices=("small", "paper"), default="paper")
    parser.add_argument("--out", metavar="DIR", default="results", help="output directory (default: results)")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress the summary")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        overrides = load_config_file(args.config) if args.config else {}
        cfg = make_config(args.experiment, overrides, args.scale, args.seed_count)
    except ConfigError as exc:
        print(f"resin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        records = RUNNERS[args.experiment](cfg)
    except (NumericError, DomainError) as exc:
        print(f"resin: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    paths = write_records(args.experiment, records, args.out)
    log.info("%s: %d seeds in %.1f s", args.experiment, len(records), time.perf_counter() - start)
    for key, (mean, std, lo, hi, _) in describe(records).items():
        log.info("  %-32s mean %-12.6g std %-12.6g range [%.6g, %.6g]", metric_name(key), mean, std, lo, hi)
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
