"""Language-mix grid experiments, run averaging, and report rendering."""

from __future__ import annotations

import csv
import json
import os
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .baseline import BaselineHyper, predict, train_linear_matcher
from .metrics import MetricSet, average_runs, confusion, prf1
from .pairs import (
    MATCH,
    DatasetSplit,
    OfferPair,
    carve_validation,
    compose_training_mix,
)
from .records import Offer
from .textvec import (
    SerializedPair,
    build_vocabulary,
    cooccurrence_vector,
    write_pair_export,
)

# trainer: (train pairs, validation pairs, test split) -> MetricSet
Trainer = Callable[[Sequence[OfferPair], Sequence[OfferPair], DatasetSplit], MetricSet]


@dataclass
class GridConfig:
    rows: list[int]            # target-language training sizes
    cols: list[int]            # auxiliary-language training sizes
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    target_language: str = "de"
    aux_language: str = "en"
    validation_fraction: float = 0.2
    workers: int = 1
    matcher_id: str = "builtin-baseline"
    corpus_digest: str = ""


@dataclass
class GridResult:
    rows: list[int]
    cols: list[int]
    cells: dict  # (n_target, n_aux) -> {"runs": [MetricSet], "mean": MetricSet}
    deltas: dict  # n_target -> f1(last col) - f1(first col), on the mean

    @classmethod
    def from_cells(cls, rows: list[int], cols: list[int], cells: dict) -> "GridResult":
        deltas = {}
        for r in rows:
            first = cells[(r, cols[0])]["mean"].f1
            last = cells[(r, cols[-1])]["mean"].f1
            deltas[r] = last - first
        return cls(rows, cols, cells, deltas)


def serialized_pair(pair: OfferPair, offers: dict[str, Offer]) -> SerializedPair:
    return SerializedPair(
        pair_id=pair.pair_id,
        text_a=offers[pair.offer_a].text(),
        text_b=offers[pair.offer_b].text(),
        label=pair.label,
    )


def evaluate_predictions(pairs: Sequence[OfferPair], predicted: Sequence[str]) -> MetricSet:
    return prf1(confusion(predicted, [p.label for p in pairs]))


def baseline_trainer(offers: dict[str, Offer], hyper: BaselineHyper | None = None,
                     min_df: int = 2) -> Trainer:
    """Built-in matcher: co-occurrence features + linear max-margin model.

    The vocabulary is built from the training pairs' texts only, never
    from validation or test text.
    """

    def run(train: Sequence[OfferPair], validation: Sequence[OfferPair],
            test: DatasetSplit) -> MetricSet:
        texts = []
        for pair in train:
            texts.append(offers[pair.offer_a].text())
            texts.append(offers[pair.offer_b].text())
        vocab = build_vocabulary(texts, min_df=min_df)
        examples = [
            (cooccurrence_vector(serialized_pair(p, offers), vocab), p.label)
            for p in train
        ]
        model = train_linear_matcher(examples, hyper or BaselineHyper(), vocab.source_fingerprint)
        predicted = [
            predict(model, cooccurrence_vector(serialized_pair(p, offers), vocab))[1]
            for p in test.pairs
        ]
        return evaluate_predictions(test.pairs, predicted)

    return run


def external_trainer(command: list[str], offers: dict[str, Offer], workdir=None) -> Trainer:
    """File-based matcher integration.

    The command is invoked with four appended path arguments
    (train, validation, test, out_metrics) and must write
    {"precision": .., "recall": .., "f1": ..} to out_metrics.
    """

    def run(train: Sequence[OfferPair], validation: Sequence[OfferPair],
            test: DatasetSplit) -> MetricSet:
        with tempfile.TemporaryDirectory(dir=workdir) as tmp:
            tmp = Path(tmp)
            paths = {name: tmp / f"{name}.jsonl" for name in ("train", "validation", "test")}
            write_pair_export((serialized_pair(p, offers) for p in train), paths["train"])
            write_pair_export((serialized_pair(p, offers) for p in validation), paths["validation"])
            write_pair_export((serialized_pair(p, offers) for p in test.pairs), paths["test"])
            out_metrics = tmp / "metrics.json"
            subprocess.run(
                [*command, str(paths["train"]), str(paths["validation"]),
                 str(paths["test"]), str(out_metrics)],
                check=True,
            )
            payload = json.loads(out_metrics.read_text())
        return MetricSet(payload["precision"], payload["recall"], payload["f1"])

    return run


class GridCellError(RuntimeError):
    def __init__(self, n_target: int, n_aux: int, seed: int, cause: Exception):
        super().__init__(f"grid cell (target={n_target}, aux={n_aux}, seed={seed}) failed: {cause}")
        self.coordinates = (n_target, n_aux, seed)


def _cell_cache_path(out_dir: Path, key: tuple, config: GridConfig) -> Path:
    n_target, n_aux, seed = key
    return out_dir / f"cell_{n_target}_{n_aux}_{seed}.json"


def _run_one(target_pool: DatasetSplit, aux_pool: DatasetSplit, test_split: DatasetSplit,
             config: GridConfig, trainer: Trainer, n_target: int, n_aux: int,
             seed: int) -> MetricSet:
    mix = compose_training_mix(
        target_pool, aux_pool, config.target_language, config.aux_language,
        n_target, n_aux, seed,
    )
    train, validation = carve_validation(mix.pairs, config.validation_fraction, seed)
    return trainer(train, validation, test_split)


def run_grid(target_pool: DatasetSplit, aux_pool: DatasetSplit, test_split: DatasetSplit,
             config: GridConfig, trainer: Trainer, out_dir=None) -> GridResult:
    """Run every (n_target, n_aux, seed) combination and aggregate.

    Per-cell results are persisted under out_dir (when given) and reused
    on rerun if their identity key still matches.
    """
    if not config.rows or not config.cols:
        raise ValueError("rows and cols must be non-empty")
    out_path = Path(out_dir) if out_dir else None
    if out_path:
        out_path.mkdir(parents=True, exist_ok=True)

    jobs = [(r, c, s) for r in config.rows for c in config.cols for s in config.seeds]
    identity = {"matcher": config.matcher_id, "corpus": config.corpus_digest}

    def run_job(key):
        n_target, n_aux, seed = key
        if out_path:
            cache = _cell_cache_path(out_path, key, config)
            if cache.exists():
                payload = json.loads(cache.read_text())
                if payload.get("identity") == identity:
                    m = payload["metrics"]
                    return key, MetricSet(m["precision"], m["recall"], m["f1"])
        try:
            metrics = _run_one(target_pool, aux_pool, test_split, config, trainer,
                               n_target, n_aux, seed)
        except Exception as exc:
            raise GridCellError(n_target, n_aux, seed, exc) from exc
        if out_path:
            cache = _cell_cache_path(out_path, key, config)
            tmp = cache.with_suffix(".tmp")
            tmp.write_text(json.dumps({
                "identity": identity,
                "cell": {"n_target": n_target, "n_aux": n_aux, "seed": seed},
                "metrics": {"precision": metrics.precision, "recall": metrics.recall,
                            "f1": metrics.f1},
            }, sort_keys=True))
            os.replace(tmp, cache)
        return key, metrics

    results: dict[tuple, MetricSet] = {}
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for key, metrics in pool.map(run_job, jobs):
                results[key] = metrics
    else:
        for job in jobs:
            key, metrics = run_job(job)
            results[key] = metrics

    cells = {}
    for r in config.rows:
        for c in config.cols:
            runs = [results[(r, c, s)] for s in config.seeds]
            cells[(r, c)] = {"runs": runs, "mean": average_runs(runs)}
    return GridResult.from_cells(config.rows, config.cols, cells)


# --------------------------------------------------------------------------- #
# reporting
# --------------------------------------------------------------------------- #


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def render_grid_report(result: GridResult, out_prefix) -> tuple[Path, Path]:
    """F1 matrix with a delta column, as CSV and an aligned text table."""
    out_prefix = Path(out_prefix)
    delta_header = f"delta_{result.cols[0]}_{result.cols[-1]}" if result.cols else "delta"
    header = ["n_target"] + [str(c) for c in result.cols] + [delta_header]
    rows = []
    for r in result.rows:
        row = [str(r)]
        row += [_pct(result.cells[(r, c)]["mean"].f1) for c in result.cols]
        row.append(_pct(result.deltas[r]))
        rows.append(row)

    csv_path = out_prefix.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)

    txt_path = out_prefix.with_suffix(".txt")
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("  ".join(h.rjust(w) for h, w in zip(header, widths)) + "\n")
        for row in rows:
            fh.write("  ".join(v.rjust(w) for v, w in zip(row, widths)) + "\n")
    return csv_path, txt_path


def render_with_without_report(per_model: dict[str, tuple[float, float]],
                               out_prefix) -> tuple[Path, Path]:
    """Per-model rows: F1 without auxiliary data, with it, and the difference.

    per_model maps model name -> (f1_without, f1_with), both in [0, 1].
    """
    out_prefix = Path(out_prefix)
    header = ["model", "f1_without", "f1_with", "difference"]
    rows = [
        [name, _pct(without), _pct(with_), _pct(with_ - without)]
        for name, (without, with_) in per_model.items()
    ]
    csv_path = out_prefix.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    txt_path = out_prefix.with_suffix(".txt")
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("  ".join(h.ljust(w) for h, w in zip(header, widths)) + "\n")
        for row in rows:
            fh.write("  ".join(v.ljust(w) for v, w in zip(row, widths)) + "\n")
    return csv_path, txt_path


def write_per_run_csv(result: GridResult, seeds: Sequence[int], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_target", "n_aux", "seed", "precision", "recall", "f1"])
        for r in result.rows:
            for c in result.cols:
                for seed, m in zip(seeds, result.cells[(r, c)]["runs"]):
                    writer.writerow([r, c, seed, f"{m.precision:.6f}",
                                     f"{m.recall:.6f}", f"{m.f1:.6f}"])
    return path


def pair_distribution(split: DatasetSplit, offers: dict[str, Offer]) -> list[dict]:
    """Per seed product: positive and negative pair counts, sorted by
    descending positive count. Offers without a seed label fall into the
    'discovered' bucket."""
    counts: dict[str, dict[str, int]] = {}
    for pair in split.pairs:
        seeds = set()
        for offer_id in (pair.offer_a, pair.offer_b):
            offer = offers.get(offer_id)
            seeds.add(offer.seed_product if offer and offer.seed_product else "discovered")
        for seed in seeds:
            bucket = counts.setdefault(seed, {"positive": 0, "negative": 0})
            bucket["positive" if pair.label == MATCH else "negative"] += 1
    rows = [
        {"seed_product": seed, "positive": c["positive"], "negative": c["negative"]}
        for seed, c in counts.items()
    ]
    rows.sort(key=lambda r: (-r["positive"], r["seed_product"]))
    return rows
