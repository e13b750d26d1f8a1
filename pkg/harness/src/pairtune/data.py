"""Reading pair-export files and turning them into sequence-pair model inputs."""

from __future__ import annotations

import json
from dataclasses import dataclass

LABEL_TO_INDEX = {"non_match": 0, "match": 1}


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    text_a: str
    text_b: str
    label: str


def read_pair_export(path) -> list[PairRecord]:
    """Line-delimited JSON records {pair_id, text_a, text_b, label}."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                record = PairRecord(obj["pair_id"], obj["text_a"], obj["text_b"],
                                    obj["label"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}: line {number}: {exc}") from exc
            if record.label not in LABEL_TO_INDEX:
                raise ValueError(f"{path}: line {number}: unknown label {record.label!r}")
            records.append(record)
    return records


def build_sequence_pair_inputs(records, tokenizer, max_length: int):
    """Encode records as two-segment classification inputs.

    Returns (inputs, skipped). Each input carries the tokenizer's encoding of
    (text_a, text_b) truncated longest-segment-first to max_length, plus the
    integer label and pair_id. Records where both texts are empty are skipped
    and reported.
    """
    inputs = []
    skipped = []
    for record in records:
        if not record.text_a.strip() and not record.text_b.strip():
            skipped.append({"pair_id": record.pair_id, "reason": "both texts empty"})
            continue
        encoded = tokenizer(
            record.text_a,
            record.text_b,
            truncation="longest_first",
            max_length=max_length,
        )
        inputs.append({
            "pair_id": record.pair_id,
            "label": LABEL_TO_INDEX[record.label],
            **{key: encoded[key] for key in encoded},
        })
    return inputs, skipped
