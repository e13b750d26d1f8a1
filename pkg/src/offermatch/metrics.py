"""Confusion counts and positive-class precision/recall/F1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .pairs import MATCH


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    f1: float


def confusion(predictions: Sequence[str], gold: Sequence[str]) -> ConfusionCounts:
    """Count outcomes with match as the positive class."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    tp = fp = fn = tn = 0
    for pred, true in zip(predictions, gold):
        if true == MATCH:
            if pred == MATCH:
                tp += 1
            else:
                fn += 1
        else:
            if pred == MATCH:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def prf1(c: ConfusionCounts) -> MetricSet:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricSet(precision, recall, f1)


def average_runs(per_run: Sequence[MetricSet]) -> MetricSet:
    """Component-wise arithmetic mean across runs."""
    if not per_run:
        raise ValueError("no runs to average")
    n = len(per_run)
    return MetricSet(
        precision=sum(m.precision for m in per_run) / n,
        recall=sum(m.recall for m in per_run) / n,
        f1=sum(m.f1 for m in per_run) / n,
    )
