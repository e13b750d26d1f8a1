"""Command-line entry point following the external-matcher file contract.

Invocation: pairtune TRAIN VALIDATION TEST OUT_METRICS [options]

The four positional arguments are paths: three pair-export files and the
metrics JSON to write. The output object carries precision/recall/f1 at the
top level plus the effective hyperparameters and per-run records.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .data import read_pair_export
from .loop import DivergedRun, fine_tune_and_evaluate
from .protocol import FineTuneProtocol, ProtocolError
from .torch_backend import torch_factory

log = logging.getLogger("pairtune")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairtune",
        description="Fine-tune a transformer pair classifier on exported pair files.")
    parser.add_argument("train", help="training pair export (line-delimited JSON)")
    parser.add_argument("validation", help="validation pair export")
    parser.add_argument("test", help="test pair export")
    parser.add_argument("out_metrics", help="path for the metrics JSON output")
    parser.add_argument("--config", help="protocol configuration JSON")
    parser.add_argument("--model", help="model identifier or local checkpoint path")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        protocol = FineTuneProtocol.load(args.config) if args.config \
            else FineTuneProtocol()
        if args.model:
            protocol.model_id = args.model
    except (ProtocolError, OSError, json.JSONDecodeError) as exc:
        log.error("configuration error: %s", exc)
        return 1
    try:
        splits = {name: read_pair_export(getattr(args, name))
                  for name in ("train", "validation", "test")}
    except (OSError, ValueError) as exc:
        log.error("input error: %s", exc)
        return 1

    factory = torch_factory(protocol.resolved_model, splits["train"],
                            splits["validation"], splits["test"], protocol)
    try:
        records, averaged, chosen_lr = fine_tune_and_evaluate(factory, protocol)
    except DivergedRun as exc:
        log.error("training failed: %s", exc)
        return 2
    payload = {
        "precision": averaged.precision,
        "recall": averaged.recall,
        "f1": averaged.f1,
        "chosen_learning_rate": chosen_lr,
        "hyperparameters": protocol.describe(),
        "runs": [r.as_dict() for r in records],
    }
    with open(args.out_metrics, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    log.info("averaged F1 %.4f over %d runs (lr=%g)",
             averaged.f1, sum(1 for r in records if not r.failed), chosen_lr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
