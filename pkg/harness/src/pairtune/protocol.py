"""Fine-tuning protocol configuration and per-run records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .metrics import MetricSet

LR_RANGE = (5e-6, 1e-4)
DEFAULT_LR_CANDIDATES = [5e-6, 1e-5, 3e-5, 5e-5, 1e-4]

# Convenience names for commonly used pretrained checkpoints.
MODEL_PRESETS = {
    "bert": "bert-base-uncased",
    "german-bert": "bert-base-german-cased",
    "multilingual-bert": "bert-base-multilingual-cased",
    "xlm-roberta": "xlm-roberta-base",
    "distil-multilingual": "distilbert-base-multilingual-cased",
}


class ProtocolError(ValueError):
    """Invalid FineTuneProtocol configuration."""


@dataclass
class FineTuneProtocol:
    model_id: str = "multilingual-bert"
    lr_candidates: list[float] = field(
        default_factory=lambda: list(DEFAULT_LR_CANDIDATES))
    max_epochs: int = 25
    patience: int = 3
    batch_size: int = 16
    weight_decay: float = 0.01
    run_seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    max_length: int = 128

    def __post_init__(self):
        if not self.lr_candidates:
            raise ProtocolError("at least one learning-rate candidate is required")
        lo, hi = LR_RANGE
        for lr in self.lr_candidates:
            if not lo <= lr <= hi:
                raise ProtocolError(
                    f"learning rate {lr} outside the allowed range [{lo}, {hi}]")
        if not 0 < self.patience < self.max_epochs:
            raise ProtocolError("patience must be positive and below max_epochs")
        if self.batch_size < 1:
            raise ProtocolError("batch_size must be positive")
        if not self.run_seeds:
            raise ProtocolError("at least one run seed is required")

    @property
    def resolved_model(self) -> str:
        return MODEL_PRESETS.get(self.model_id, self.model_id)

    @classmethod
    def load(cls, path) -> "FineTuneProtocol":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ProtocolError(f"unknown protocol keys: {sorted(unknown)}")
        return cls(**raw)

    def describe(self) -> dict:
        """Effective hyperparameters, recorded alongside every metrics file."""
        return {
            "model": self.resolved_model,
            "lr_candidates": self.lr_candidates,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "batch_size": self.batch_size,
            "weight_decay": self.weight_decay,
            "run_seeds": self.run_seeds,
            "max_length": self.max_length,
            "optimizer": "adamw",
        }


@dataclass
class RunRecord:
    seed: int
    learning_rate: float
    epochs_executed: int
    best_validation_f1: float
    test_metrics: Optional[MetricSet]
    failed: bool = False

    def as_dict(self) -> dict:
        payload = {
            "seed": self.seed,
            "learning_rate": self.learning_rate,
            "epochs_executed": self.epochs_executed,
            "best_validation_f1": self.best_validation_f1,
            "failed": self.failed,
        }
        if self.test_metrics is not None:
            payload["test"] = {
                "precision": self.test_metrics.precision,
                "recall": self.test_metrics.recall,
                "f1": self.test_metrics.f1,
            }
        return payload
