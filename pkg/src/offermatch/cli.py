"""Command-line entry point.

Exit codes: 0 success, 1 configuration/validation error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import ConfigError, PipelineConfig, StageFailure, run_pipeline

STAGE_COMMANDS = [
    "ingest", "cluster", "pairs", "split", "compose",
    "train-baseline", "eval", "grid", "export-transformer", "check",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offermatch",
        description="Build product-matching datasets and run language-mix experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="pipeline config JSON")
        cmd.add_argument("--out", required=True, help="artifact output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--workers", type=int, default=None, help="override worker count")
        return cmd

    add("run", "run the full pipeline")
    for name in STAGE_COMMANDS:
        add(name, f"run only the {name} stage")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = PipelineConfig.load(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        if args.command == "grid" and not config.grid:
            raise ConfigError("config has no grid section")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    only = None if args.command == "run" else [args.command]
    try:
        run_pipeline(config, args.out, only=only)
    except StageFailure as exc:
        print(str(exc), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
