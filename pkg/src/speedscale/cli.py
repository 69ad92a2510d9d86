"""Command line: ``speedscale run <config>`` and ``speedscale compare <config>``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError, SpeedScaleError
from .scenario import compare_scenario, format_table, load_scenario, run_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speedscale", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run every policy on every workload and write reports"),
        ("compare", "cross-policy cost table over a shared workload set"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="scenario JSON file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="seed for random workloads (overrides workload.seed)")
        p.add_argument("--max-events", type=int, help="event budget per simulation")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sc = load_scenario(args.config, out=args.out, seed=args.seed, max_events=args.max_events)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            summary, ok = run_scenario(sc)
            print(
                f"{sc.name}: {summary['n_runs']} runs, {summary['n_failed']} failed, "
                f"max ratio {summary['max_ratio']}, max violation {summary['max_violation']}"
            )
            return EXIT_OK if ok else EXIT_FAILED
        rows = compare_scenario(sc)
        print(format_table(rows))
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpeedScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
