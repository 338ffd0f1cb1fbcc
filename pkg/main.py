"""
frugaltree - cost-sensitive decision-tree induction.

Entry point: builds the command parser and dispatches to the handlers.
"""
import argparse
import sys

import pandas as pd

from cli.commands import EXIT_USAGE, register_commands
from core.errors import TreeError
from utils.logger import logger, set_level


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frugaltree",
        description="Cost-sensitive decision trees: preprocessing, training, benchmarks and oracle audits.",
    )
    parser.add_argument("--log-level", dest="log_level", default="",
                        help="override LOG_LEVEL for this run (DEBUG, INFO, WARNING, ERROR)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.handler(args)
    except (TreeError, ValueError, OSError, KeyError, pd.errors.ParserError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
