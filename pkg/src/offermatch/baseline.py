"""Word co-occurrence linear max-margin baseline matcher.

A primal hinge-loss model trained with Pegasos-style stochastic
subgradient descent (step size 1/(lambda * t)) over binary co-occurrence
features. Training is sequential and seed-deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .pairs import MATCH
from .seeding import rng_for
from .textvec import SparseVector, Vocabulary


@dataclass
class BaselineHyper:
    lam: float = 1e-4
    epochs: int = 100
    seed: int = 1

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    hyper: BaselineHyper
    vocab_fingerprint: str = ""
    final_objective: float = field(default=float("nan"))
    initial_objective: float = field(default=float("nan"))

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])


def _label_sign(label: str) -> float:
    return 1.0 if label == MATCH else -1.0


def _score(weights: np.ndarray, bias: float, x: SparseVector) -> float:
    return float(sum(w * weights[i] for i, w in x.entries) + bias)


def objective(weights: np.ndarray, bias: float, lam: float,
              examples: list[tuple[SparseVector, str]]) -> float:
    """L2-regularized mean hinge loss."""
    hinge = 0.0
    for x, label in examples:
        margin = _label_sign(label) * _score(weights, bias, x)
        hinge += max(0.0, 1.0 - margin)
    return 0.5 * lam * float(weights @ weights) + hinge / len(examples)


def train_linear_matcher(examples: list[tuple[SparseVector, str]],
                         hyper: BaselineHyper,
                         vocab_fingerprint: str = "") -> LinearModel:
    """Fit the linear matcher by seeded stochastic subgradient descent."""
    if not examples:
        raise ValueError("no training examples")
    labels = {label for _, label in examples}
    if len(labels) < 2:
        raise ValueError("training data contains a single class")
    dimension = examples[0][0].dimension
    for x, _ in examples:
        if x.dimension != dimension:
            raise ValueError("inconsistent feature dimensions")

    weights = np.zeros(dimension)
    bias = 0.0
    initial = objective(weights, bias, hyper.lam, examples)
    radius = 1.0 / math.sqrt(hyper.lam)
    total_steps = hyper.epochs * len(examples)
    # the returned model averages the iterates of the second half of
    # training, which stabilizes the 1/(lambda*t) step schedule
    avg_from = total_steps // 2
    avg_weights = np.zeros(dimension)
    avg_bias = 0.0
    averaged = 0

    t = 0
    order = list(range(len(examples)))
    for epoch in range(hyper.epochs):
        rng_for(hyper.seed, "epoch", epoch).shuffle(order)
        for idx in order:
            t += 1
            eta = 1.0 / (hyper.lam * t)
            x, label = examples[idx]
            y = _label_sign(label)
            margin = y * _score(weights, bias, x)
            weights *= 1.0 - eta * hyper.lam
            if margin < 1.0:
                for i, w in x.entries:
                    weights[i] += eta * y * w
                bias += eta * y
            norm = math.sqrt(float(weights @ weights) + bias * bias)
            if norm > radius:
                scale = radius / norm
                weights *= scale
                bias *= scale
            if t > avg_from:
                avg_weights += weights
                avg_bias += bias
                averaged += 1
    if averaged:
        weights = avg_weights / averaged
        bias = avg_bias / averaged
    final = objective(weights, bias, hyper.lam, examples)
    if not np.all(np.isfinite(weights)):
        raise ArithmeticError("non-finite weights after training")
    return LinearModel(weights, bias, hyper, vocab_fingerprint, final, initial)


def predict(model: LinearModel, features: SparseVector) -> tuple[float, str]:
    """Decision score and label; a score of exactly 0 resolves to non_match."""
    if features.dimension != model.dimension:
        raise ValueError("feature dimension does not match model")
    score = _score(model.weights, model.bias, features)
    return score, MATCH if score > 0.0 else "non_match"


def save_model(model: LinearModel, path) -> None:
    payload = {
        "dimension": model.dimension,
        "lambda": model.hyper.lam,
        "epochs": model.hyper.epochs,
        "seed": model.hyper.seed,
        "vocab_fingerprint": model.vocab_fingerprint,
        "bias": model.bias,
        "weights": model.weights.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path, vocab: Vocabulary | None = None) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if vocab is not None:
        if payload["vocab_fingerprint"] != vocab.source_fingerprint:
            raise ValueError("model/vocabulary fingerprint mismatch")
        if payload["dimension"] != vocab.size:
            raise ValueError("model dimension does not match vocabulary size")
    hyper = BaselineHyper(payload["lambda"], payload["epochs"], payload["seed"])
    return LinearModel(np.asarray(payload["weights"], dtype=float), payload["bias"],
                       hyper, payload["vocab_fingerprint"])
