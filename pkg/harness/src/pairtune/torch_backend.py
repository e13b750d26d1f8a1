"""Torch-based trainer implementing the epoch-trainer interface."""

from __future__ import annotations

import logging
import random

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .data import build_sequence_pair_inputs
from .metrics import MetricSet, prf1
from .protocol import FineTuneProtocol

log = logging.getLogger(__name__)


class TorchPairTrainer:
    """Fine-tunes a sequence-classification checkpoint on encoded pair inputs."""

    def __init__(self, model_path: str, train_records, validation_records,
                 test_records, lr: float, seed: int, protocol: FineTuneProtocol):
        torch.manual_seed(seed)
        self.protocol = protocol
        self.lr = lr
        self.seed = seed
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForSequenceClassification.from_pretrained(
            model_path, num_labels=2)
        self.skipped = []
        self.train_inputs = self._encode(train_records)
        self.validation_inputs = self._encode(validation_records)
        self.test_inputs = self._encode(test_records)
        self.optimizer = torch.optim.AdamW(
            self.model.parameters(), lr=lr, weight_decay=protocol.weight_decay)
        self._epoch = 0

    def _encode(self, records):
        inputs, skipped = build_sequence_pair_inputs(
            records, self.tokenizer, self.protocol.max_length)
        self.skipped.extend(skipped)
        return inputs

    def _batches(self, inputs, shuffle_rng=None):
        order = list(range(len(inputs)))
        if shuffle_rng is not None:
            shuffle_rng.shuffle(order)
        size = self.protocol.batch_size
        for start in range(0, len(order), size):
            chunk = [inputs[i] for i in order[start:start + size]]
            features = [{k: v for k, v in item.items()
                         if k not in ("pair_id", "label")} for item in chunk]
            batch = self.tokenizer.pad(features, return_tensors="pt")
            labels = torch.tensor([item["label"] for item in chunk])
            yield batch, labels

    def train_epoch(self) -> float:
        self._epoch += 1
        rng = random.Random(self.seed * 100003 + self._epoch)
        self.model.train()
        total, count = 0.0, 0
        for batch, labels in self._batches(self.train_inputs, shuffle_rng=rng):
            self.optimizer.zero_grad()
            out = self.model(**batch, labels=labels)
            out.loss.backward()
            self.optimizer.step()
            total += out.loss.item()
            count += 1
        return total / count if count else 0.0

    @torch.no_grad()
    def _predict(self, inputs):
        self.model.eval()
        predictions, gold = [], []
        for batch, labels in self._batches(inputs):
            logits = self.model(**batch).logits
            predictions.extend(logits.argmax(dim=-1).tolist())
            gold.extend(labels.tolist())
        return predictions, gold

    def validation_f1(self) -> float:
        return prf1(*self._predict(self.validation_inputs)).f1

    def snapshot(self):
        return {k: v.detach().clone() for k, v in self.model.state_dict().items()}

    def restore(self, state) -> None:
        self.model.load_state_dict(state)

    def evaluate_test(self) -> MetricSet:
        return prf1(*self._predict(self.test_inputs))


def torch_factory(model_path: str, train_records, validation_records,
                  test_records, protocol: FineTuneProtocol):
    """Trainer factory for the fine-tuning loop."""

    def make(lr: float, seed: int) -> TorchPairTrainer:
        log.info("building trainer: model=%s lr=%g seed=%d", model_path, lr, seed)
        return TorchPairTrainer(model_path, train_records, validation_records,
                                test_records, lr, seed, protocol)

    return make
