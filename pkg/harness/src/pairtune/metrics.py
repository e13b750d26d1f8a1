"""Positive-class precision/recall/F1 for binary pair classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    f1: float


def prf1(predictions: Sequence[int], gold: Sequence[int]) -> MetricSet:
    """Metrics with label 1 (match) as the positive class.

    Zero denominators yield 0.0 rather than raising.
    """
    if len(predictions) != len(gold):
        raise ValueError("length mismatch between predictions and gold labels")
    tp = sum(1 for p, g in zip(predictions, gold) if p == g == 1)
    fp = sum(1 for p, g in zip(predictions, gold) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(predictions, gold) if p == 0 and g == 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom else 0.0
    return MetricSet(precision, recall, f1)


def average_runs(runs: Sequence[MetricSet]) -> MetricSet:
    if not runs:
        raise ValueError("cannot average zero runs")
    n = len(runs)
    return MetricSet(
        sum(m.precision for m in runs) / n,
        sum(m.recall for m in runs) / n,
        sum(m.f1 for m in runs) / n,
    )
