"""Fine-tuning control flow: early stopping, learning-rate search, run averaging.

The loop is written against a minimal trainer interface so its behavior can be
verified exactly with stubbed trainers, independent of any model backend:

    trainer.train_epoch() -> float            mean training loss for one epoch
    trainer.validation_f1() -> float          F1 on the validation split
    trainer.snapshot() -> state               copy of the current parameters
    trainer.restore(state) -> None            load a snapshot back
    trainer.evaluate_test() -> MetricSet      metrics on the test split

A trainer factory builds one trainer per (learning rate, seed) combination.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

from .metrics import MetricSet, average_runs
from .protocol import FineTuneProtocol, RunRecord

log = logging.getLogger(__name__)


class EpochTrainer(Protocol):
    def train_epoch(self) -> float: ...
    def validation_f1(self) -> float: ...
    def snapshot(self): ...
    def restore(self, state) -> None: ...
    def evaluate_test(self) -> MetricSet: ...


TrainerFactory = Callable[[float, int], EpochTrainer]


class DivergedRun(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class FineTuneOutcome:
    epochs_executed: int
    best_epoch: int
    best_validation_f1: float
    best_state: object


def run_fine_tune(trainer: EpochTrainer, protocol: FineTuneProtocol) -> FineTuneOutcome:
    """Train up to max_epochs, stopping after `patience` non-improving epochs.

    Improvement means a strictly higher validation F1 than any earlier epoch.
    The trainer is left restored to its best-validation state.
    """
    best_f1 = -math.inf
    best_epoch = 0
    best_state = None
    stale_epochs = 0
    epochs = 0
    for epoch in range(1, protocol.max_epochs + 1):
        loss = trainer.train_epoch()
        if not math.isfinite(loss):
            raise DivergedRun(f"non-finite training loss at epoch {epoch}")
        epochs = epoch
        f1 = trainer.validation_f1()
        if f1 > best_f1:
            best_f1, best_epoch, stale_epochs = f1, epoch, 0
            best_state = trainer.snapshot()
        else:
            stale_epochs += 1
        log.debug("epoch %d: loss=%.4f val_f1=%.4f (best %.4f @ %d)",
                  epoch, loss, f1, best_f1, best_epoch)
        if stale_epochs >= protocol.patience:
            break
    trainer.restore(best_state)
    return FineTuneOutcome(epochs, best_epoch, best_f1, best_state)


def lr_search(factory: TrainerFactory, protocol: FineTuneProtocol,
              seed: Optional[int] = None) -> float:
    """Pick the candidate with the best validation F1; ties favor the smaller lr.

    Candidates whose training diverges are skipped; if all diverge, that is a
    hard error.
    """
    if seed is None:
        seed = protocol.run_seeds[0]
    best_lr = None
    best_f1 = -math.inf
    for lr in sorted(protocol.lr_candidates):
        try:
            outcome = run_fine_tune(factory(lr, seed), protocol)
        except DivergedRun:
            log.warning("learning rate %g diverged during search", lr)
            continue
        if outcome.best_validation_f1 > best_f1:
            best_f1, best_lr = outcome.best_validation_f1, lr
    if best_lr is None:
        raise DivergedRun("every learning-rate candidate diverged")
    return best_lr


def fine_tune_and_evaluate(
    factory: TrainerFactory,
    protocol: FineTuneProtocol,
) -> tuple[list[RunRecord], MetricSet, float]:
    """Full protocol: lr search, one run per seed, averaged test metrics.

    Returns (run records, averaged metrics over successful runs, chosen lr).
    At least one run must succeed.
    """
    if len(protocol.lr_candidates) > 1:
        chosen_lr = lr_search(factory, protocol)
    else:
        chosen_lr = protocol.lr_candidates[0]
    records = []
    for seed in protocol.run_seeds:
        trainer = factory(chosen_lr, seed)
        try:
            outcome = run_fine_tune(trainer, protocol)
        except DivergedRun as exc:
            log.warning("run with seed %d failed: %s", seed, exc)
            records.append(RunRecord(seed, chosen_lr, 0, 0.0, None, failed=True))
            continue
        records.append(RunRecord(seed, chosen_lr, outcome.epochs_executed,
                                 outcome.best_validation_f1,
                                 trainer.evaluate_test()))
    successes = [r.test_metrics for r in records if not r.failed]
    if not successes:
        raise DivergedRun("no successful runs to average")
    return records, average_runs(successes), chosen_lr
