"""End-to-end pipeline orchestration with content-addressed stage caching.

Stage order: ingest -> cluster -> pairs -> split -> compose ->
train-baseline -> eval -> export-transformer -> check -> grid (optional).
Every artifact is deterministic for a fixed config; the manifest records
a digest for every file written.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .baseline import BaselineHyper, predict, save_model, load_model, train_linear_matcher
from .clustering import ProductCluster, NormalizedId, cluster_offers
from .grid import (
    GridConfig,
    baseline_trainer,
    external_trainer,
    render_grid_report,
    run_grid,
    serialized_pair,
    write_per_run_csv,
)
from .ingest import IngestResult, ingest_documents, parse_offer_feed
from .metrics import confusion, prf1
from .pairs import (
    DatasetSplit,
    assemble_split,
    carve_validation,
    compose_training_mix,
    generate_negative_pairs,
    generate_positive_pairs,
    identifier_variants,
    label_hardness,
    leakage_check,
    read_pairs,
    strip_identifiers,
    write_pairs,
)
from .records import Offer, RawDocument, validate_offer
from .seeding import derive_seed
from .textvec import build_vocabulary, read_vocabulary, vectorize, write_pair_export, write_vocabulary

log = logging.getLogger("offermatch")

STAGE_ORDER = [
    "ingest", "cluster", "pairs", "split", "compose",
    "train-baseline", "eval", "export-transformer", "check", "grid",
]


class ConfigError(ValueError):
    """Invalid or unresolvable pipeline configuration."""


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    input: dict
    seed: int = 1
    corner_fraction: float = 0.5
    cap_per_cluster: int = 30
    per_cluster_quota: int = 30
    k_similar: int = 5
    min_df: int = 2
    test_size: int = 1200
    test_match_ratio: float = 0.25
    target_language: str = "de"
    aux_language: str = "en"
    n_target: int = 1800
    n_aux: int = 7200
    validation_fraction: float = 0.2
    baseline: dict = field(default_factory=lambda: {"lambda": 1e-4, "epochs": 100})
    grid: dict | None = None
    workers: int = 1

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**raw)
        config.validate(base=Path(path).parent)
        return config

    def validate(self, base: Path | None = None) -> None:
        if not isinstance(self.input, dict) or not (
            {"feed", "html_dir", "synthetic"} & set(self.input)
        ):
            raise ConfigError("input must name a feed, an html_dir, or a synthetic spec")
        for key in ("feed", "html_dir"):
            if key in self.input:
                path = Path(self.input[key])
                if base is not None and not path.is_absolute():
                    path = base / path
                    self.input[key] = str(path)
                if not path.exists():
                    raise ConfigError(f"input path does not exist: {path}")
        for name in ("corner_fraction", "test_match_ratio", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be within [0, 1]")
        for name in ("cap_per_cluster", "per_cluster_quota", "k_similar", "min_df",
                     "test_size", "n_target", "workers"):
            if getattr(self, name) < 1 and name not in ("n_target",):
                raise ConfigError(f"{name} must be positive")
        if self.n_target < 0 or self.n_aux < 0:
            raise ConfigError("training sizes must be non-negative")

    def stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)


# --------------------------------------------------------------------------- #
# artifact serialization helpers
# --------------------------------------------------------------------------- #

def _offer_record(offer: Offer) -> dict:
    record = {"offer_id": offer.offer_id, "language": offer.language,
              "source_host": offer.source_host, "title": offer.title,
              "description": offer.description}
    for key in ("gtin", "ean", "mpn", "seed_product"):
        value = getattr(offer, key)
        if value:
            record[key] = value
    return record


def _offer_from_record(obj: dict) -> Offer:
    return Offer(
        offer_id=obj["offer_id"], language=obj["language"],
        source_host=obj["source_host"], title=obj["title"],
        description=obj.get("description", ""), gtin=obj.get("gtin"),
        ean=obj.get("ean"), mpn=obj.get("mpn"), seed_product=obj.get("seed_product"),
    )


def write_offers(offers, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for offer in offers:
            fh.write(json.dumps(_offer_record(offer), ensure_ascii=False) + "\n")


def read_offers(path) -> list[Offer]:
    with open(path, encoding="utf-8") as fh:
        return [_offer_from_record(json.loads(line)) for line in fh if line.strip()]


def _write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _split_record(split: DatasetSplit) -> dict:
    return {
        "role": split.role,
        "seed": split.seed,
        "size": len(split.pairs),
        "match_ratio": round(split.match_ratio, 10),
        "per_language_counts": split.per_language_counts,
    }


# --------------------------------------------------------------------------- #
# stages
# --------------------------------------------------------------------------- #

@dataclass
class Stage:
    name: str
    inputs: list[Path]
    outputs: list[Path]
    config_slice: dict
    run: callable


def _load_split(path: Path, role: str, seed: int) -> DatasetSplit:
    return DatasetSplit.from_pairs(role, read_pairs(path), seed)


def build_stages(config: PipelineConfig, out: Path) -> list[Stage]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "offers": out / "offers.jsonl",
        "ingest_errors": out / "ingest_errors.jsonl",
        "clusters": out / "clusters.jsonl",
        "cluster_skips": out / "cluster_skips.jsonl",
        "offers_stripped": out / "offers_stripped.jsonl",
        "pairs": out / "pairs.jsonl",
        "pair_reports": out / "pair_reports.jsonl",
        "test_split": out / "test_split.jsonl",
        "split_manifest": out / "split_manifest.json",
        "mix": out / "mix.jsonl",
        "mix_manifest": out / "mix_manifest.json",
        "vocab": out / "vocab.txt",
        "model": out / "model.json",
        "train_report": out / "train_report.json",
        "metrics": out / "metrics.json",
        "check_report": out / "check_report.json",
    }
    pool_paths = {
        lang: out / f"train_pool_{lang}.jsonl"
        for lang in sorted({config.target_language, config.aux_language})
    }
    export_dir = out / "export"
    grid_dir = out / "grid"

    # ---- ingest ----
    def run_ingest():
        if "synthetic" in config.input:
            from .synthetic import synthetic_corpus
            spec = dict(config.input["synthetic"])
            offers = synthetic_corpus(
                n_products=spec.get("n_products", 12),
                per_language=spec.get("per_language"),
                seed=spec.get("seed", 7),
            )
            result = IngestResult(offers, [])
        elif "feed" in config.input:
            with open(config.input["feed"], encoding="utf-8") as fh:
                result = parse_offer_feed(fh)
            result.offers.sort(key=lambda o: o.offer_id)
        else:
            html_dir = Path(config.input["html_dir"])
            hint = config.input.get("format_hint", "jsonld_html")
            docs = [
                RawDocument(doc_id=p.stem, source_host=config.input.get("source_host", p.stem),
                            body=p.read_text(encoding="utf-8"), format_hint=hint)
                for p in sorted(html_dir.glob("**/*.html"))
            ]
            result = ingest_documents(docs)
        for offer in result.offers:
            problems = validate_offer(offer)
            if problems:
                raise ValueError(f"invalid offer {offer.offer_id}: {problems}")
        write_offers(result.offers, paths["offers"])
        _write_jsonl(
            ({"input_ref": e.input_ref, "reason": e.reason} for e in result.errors),
            paths["ingest_errors"],
        )

    input_inputs = []
    if "feed" in config.input:
        input_inputs = [Path(config.input["feed"])]

    stages = [Stage(
        "ingest", input_inputs, [paths["offers"], paths["ingest_errors"]],
        {"input": config.input}, run_ingest,
    )]

    # ---- cluster ----
    def run_cluster():
        offers = read_offers(paths["offers"])
        result = cluster_offers(offers)
        _write_jsonl(
            ({"cluster_id": c.cluster_id, "offer_ids": c.member_offers,
              "normalized_ids": [i.key() for i in c.ids],
              "language_partition": c.language_partition}
             for c in result.clusters),
            paths["clusters"],
        )
        _write_jsonl(
            ({"offer_id": oid, "reason": reason} for oid, reason in result.skipped),
            paths["cluster_skips"],
        )

    stages.append(Stage(
        "cluster", [paths["offers"]], [paths["clusters"], paths["cluster_skips"]],
        {}, run_cluster,
    ))

    # ---- pairs ----
    def run_pairs():
        offers = {o.offer_id: o for o in read_offers(paths["offers"])}
        clusters = []
        with open(paths["clusters"], encoding="utf-8") as fh:
            for line in fh:
                obj = json.loads(line)
                ids = []
                for key in obj["normalized_ids"]:
                    kind, value = key.split(":", 1)
                    ids.append(NormalizedId(kind, value))
                clusters.append(ProductCluster(
                    obj["cluster_id"], obj["offer_ids"], ids, obj["language_partition"],
                ))

        reports = []
        stripped: dict[str, Offer] = {}
        excluded: set[str] = set()
        for cluster in clusters:
            # share every member's identifier variants across the cluster,
            # so a partner's GTIN quoted in a title is scrubbed too
            variants = set()
            for member in cluster.member_offers:
                variants |= identifier_variants(offers[member])
            for member in cluster.member_offers:
                clean = strip_identifiers(offers[member], variants)
                if not clean.title:
                    excluded.add(member)
                    reports.append({"offer_id": member, "reason": "title empty after identifier stripping"})
                stripped[member] = clean
        write_offers(
            sorted(stripped.values(), key=lambda o: o.offer_id), paths["offers_stripped"],
        )

        usable = [
            ProductCluster(
                c.cluster_id, [m for m in c.member_offers if m not in excluded], c.ids,
                {lang: [m for m in members if m not in excluded]
                 for lang, members in c.language_partition.items()},
            )
            for c in clusters
        ]
        vocab = build_vocabulary(
            [stripped[m].text() for c in usable for m in c.member_offers],
            min_df=config.min_df,
        )
        vectors = {oid: vectorize(o.text(), vocab) for oid, o in stripped.items()}
        seed = config.stage_seed("pairs")
        positives = []
        for cluster in usable:
            positives += generate_positive_pairs(
                cluster, vectors.__getitem__, config.cap_per_cluster, seed,
            )
        negatives, neg_report = generate_negative_pairs(
            usable, vectors.__getitem__, config.k_similar, config.per_cluster_quota,
        )
        reports += [{"reason": r} for r in neg_report]
        pairs = label_hardness(positives + negatives, config.corner_fraction)
        pairs.sort(key=lambda p: p.pair_id)
        write_pairs(pairs, paths["pairs"])
        _write_jsonl(reports, paths["pair_reports"])

    stages.append(Stage(
        "pairs", [paths["offers"], paths["clusters"]],
        [paths["offers_stripped"], paths["pairs"], paths["pair_reports"]],
        {k: getattr(config, k) for k in
         ("corner_fraction", "cap_per_cluster", "per_cluster_quota", "k_similar", "min_df")},
        run_pairs,
    ))

    # ---- split ----
    def run_split():
        pairs = read_pairs(paths["pairs"])
        seed = config.stage_seed("split")
        target = [p for p in pairs if p.language == config.target_language]
        test = assemble_split(
            [p for p in target if p.label == "match"],
            [p for p in target if p.label == "non_match"],
            config.test_size, config.test_match_ratio, config.corner_fraction,
            seed, role="test",
        )
        test_ids = {p.pair_id for p in test.pairs}
        write_pairs(test.pairs, paths["test_split"])
        manifest = {"test": _split_record(test), "pools": {},
                    "source_digest": file_digest(paths["pairs"])}
        for lang, pool_path in pool_paths.items():
            pool = DatasetSplit.from_pairs(
                "train_pool",
                [p for p in pairs if p.language == lang and p.pair_id not in test_ids],
                seed,
            )
            write_pairs(pool.pairs, pool_path)
            manifest["pools"][lang] = _split_record(pool)
        _write_json(manifest, paths["split_manifest"])

    stages.append(Stage(
        "split", [paths["pairs"]],
        [paths["test_split"], paths["split_manifest"], *pool_paths.values()],
        {k: getattr(config, k) for k in
         ("test_size", "test_match_ratio", "corner_fraction", "target_language", "aux_language")},
        run_split,
    ))

    # ---- compose ----
    def run_compose():
        seed = config.stage_seed("compose")
        target_pool = _load_split(pool_paths[config.target_language], "train_pool", seed)
        aux_pool = _load_split(pool_paths[config.aux_language], "train_pool", seed)
        mix = compose_training_mix(
            target_pool, aux_pool, config.target_language, config.aux_language,
            config.n_target, config.n_aux, seed,
        )
        write_pairs(mix.pairs, paths["mix"])
        _write_json({
            "target_language": mix.target_language, "n_target": mix.n_target,
            "auxiliary_language": mix.auxiliary_language, "n_auxiliary": mix.n_auxiliary,
            "seed": mix.seed, "size": len(mix.pairs),
            "matches": sum(1 for p in mix.pairs if p.label == "match"),
        }, paths["mix_manifest"])

    stages.append(Stage(
        "compose", list(pool_paths.values()), [paths["mix"], paths["mix_manifest"]],
        {k: getattr(config, k) for k in
         ("n_target", "n_aux", "target_language", "aux_language")},
        run_compose,
    ))

    # ---- train-baseline ----
    def run_train():
        seed = config.stage_seed("train-baseline")
        offers = {o.offer_id: o for o in read_offers(paths["offers_stripped"])}
        mix_pairs = read_pairs(paths["mix"])
        train, validation = carve_validation(mix_pairs, config.validation_fraction, seed)
        texts = []
        for pair in train:
            texts.append(offers[pair.offer_a].text())
            texts.append(offers[pair.offer_b].text())
        vocab = build_vocabulary(texts, min_df=config.min_df)
        write_vocabulary(vocab, paths["vocab"])
        from .textvec import cooccurrence_vector
        examples = [
            (cooccurrence_vector(serialized_pair(p, offers), vocab), p.label)
            for p in train
        ]
        hyper = BaselineHyper(
            lam=config.baseline.get("lambda", 1e-4),
            epochs=config.baseline.get("epochs", 100),
            seed=seed,
        )
        model = train_linear_matcher(examples, hyper, vocab.source_fingerprint)
        save_model(model, paths["model"])
        val_pred = [
            predict(model, cooccurrence_vector(serialized_pair(p, offers), vocab))[1]
            for p in validation
        ]
        val_metrics = prf1(confusion(val_pred, [p.label for p in validation]))
        _write_json({
            "train_size": len(train), "validation_size": len(validation),
            "vocabulary_size": vocab.size,
            "initial_objective": model.initial_objective,
            "final_objective": model.final_objective,
            "validation": dataclasses.asdict(val_metrics),
        }, paths["train_report"])

    stages.append(Stage(
        "train-baseline", [paths["mix"], paths["offers_stripped"]],
        [paths["vocab"], paths["model"], paths["train_report"]],
        {"baseline": config.baseline, "validation_fraction": config.validation_fraction,
         "min_df": config.min_df},
        run_train,
    ))

    # ---- eval ----
    def run_eval():
        offers = {o.offer_id: o for o in read_offers(paths["offers_stripped"])}
        vocab = read_vocabulary(paths["vocab"])
        model = load_model(paths["model"], vocab)
        test = _load_split(paths["test_split"], "test", config.stage_seed("split"))
        from .textvec import cooccurrence_vector
        predictions = [
            predict(model, cooccurrence_vector(serialized_pair(p, offers), vocab))[1]
            for p in test.pairs
        ]
        counts = confusion(predictions, [p.label for p in test.pairs])
        metrics = prf1(counts)
        _write_json({
            "precision": metrics.precision, "recall": metrics.recall, "f1": metrics.f1,
            "confusion": dataclasses.asdict(counts),
        }, paths["metrics"])

    stages.append(Stage(
        "eval", [paths["model"], paths["vocab"], paths["test_split"], paths["offers_stripped"]],
        [paths["metrics"]], {}, run_eval,
    ))

    # ---- export-transformer ----
    def run_export():
        export_dir.mkdir(parents=True, exist_ok=True)
        offers = {o.offer_id: o for o in read_offers(paths["offers_stripped"])}
        seed = config.stage_seed("train-baseline")
        mix_pairs = read_pairs(paths["mix"])
        train, validation = carve_validation(mix_pairs, config.validation_fraction, seed)
        test = read_pairs(paths["test_split"])
        for name, pairs in (("train", train), ("validation", validation), ("test", test)):
            write_pair_export(
                (serialized_pair(p, offers) for p in pairs), export_dir / f"{name}.jsonl",
            )

    stages.append(Stage(
        "export-transformer", [paths["mix"], paths["test_split"], paths["offers_stripped"]],
        [export_dir / "train.jsonl", export_dir / "validation.jsonl", export_dir / "test.jsonl"],
        {"validation_fraction": config.validation_fraction},
        run_export,
    ))

    # ---- check ----
    def run_check():
        offers = {o.offer_id: o for o in read_offers(paths["offers_stripped"])}
        mix_pairs = read_pairs(paths["mix"])
        test = _load_split(paths["test_split"], "test", config.stage_seed("split"))
        violations = leakage_check(mix_pairs, test)
        id_violations = []
        originals = {o.offer_id: o for o in read_offers(paths["offers"])}
        for pair in mix_pairs + test.pairs:
            for oid in (pair.offer_a, pair.offer_b):
                text = offers[oid].text().lower()
                for variant in identifier_variants(originals[oid]):
                    if variant.lower() in text:
                        id_violations.append({"offer_id": oid, "identifier": variant})
        report = {
            "leakage": violations,
            "identifier_residue": id_violations,
            "clean": not violations and not id_violations,
        }
        _write_json(report, paths["check_report"])
        if not report["clean"]:
            raise RuntimeError(f"check failed: {len(violations)} leaks, "
                               f"{len(id_violations)} identifier residues")

    stages.append(Stage(
        "check", [paths["mix"], paths["test_split"], paths["offers_stripped"], paths["offers"]],
        [paths["check_report"]], {}, run_check,
    ))

    # ---- grid ----
    def run_grid_stage():
        spec = config.grid or {}
        seed = config.stage_seed("compose")
        target_pool = _load_split(pool_paths[config.target_language], "train_pool", seed)
        aux_pool = _load_split(pool_paths[config.aux_language], "train_pool", seed)
        test = _load_split(paths["test_split"], "test", config.stage_seed("split"))
        grid_config = GridConfig(
            rows=spec["rows"], cols=spec["cols"],
            seeds=spec.get("seeds", [1, 2, 3]),
            target_language=config.target_language,
            aux_language=config.aux_language,
            validation_fraction=config.validation_fraction,
            workers=spec.get("workers", config.workers),
            matcher_id=spec.get("matcher", "builtin-baseline"),
            corpus_digest=file_digest(paths["pairs"]),
        )
        offers = {o.offer_id: o for o in read_offers(paths["offers_stripped"])}
        matcher = spec.get("matcher", "builtin-baseline")
        if matcher == "builtin-baseline":
            hyper = BaselineHyper(
                lam=config.baseline.get("lambda", 1e-4),
                epochs=config.baseline.get("epochs", 100),
                seed=config.stage_seed("grid"),
            )
            trainer = baseline_trainer(offers, hyper, config.min_df)
        else:
            trainer = external_trainer(list(matcher["command"]), offers)
        result = run_grid(target_pool, aux_pool, test, grid_config, trainer,
                          out_dir=grid_dir / "cells")
        render_grid_report(result, grid_dir / "report")
        write_per_run_csv(result, grid_config.seeds, grid_dir / "per_run.csv")

    if config.grid:
        stages.append(Stage(
            "grid", [paths["test_split"], paths["pairs"], paths["offers_stripped"],
                     *pool_paths.values()],
            [grid_dir / "report.csv", grid_dir / "report.txt", grid_dir / "per_run.csv"],
            {"grid": config.grid, "baseline": config.baseline},
            run_grid_stage,
        ))

    return stages


# --------------------------------------------------------------------------- #
# runner
# --------------------------------------------------------------------------- #

def _stage_key(stage: Stage, seed: int) -> str:
    payload = {
        "config": stage.config_slice,
        "seed": seed,
        "inputs": {p.name: file_digest(p) for p in stage.inputs if p.exists()},
        "version": __version__,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def run_pipeline(config: PipelineConfig, out_dir, only: list[str] | None = None) -> dict:
    """Execute the configured stages, skipping any whose inputs and config
    are unchanged since the recorded manifest. Returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "run_manifest.json"
    previous = {}
    if manifest_path.exists():
        try:
            previous = json.loads(manifest_path.read_text()).get("stages", {})
        except (json.JSONDecodeError, OSError):
            previous = {}

    stages = build_stages(config, out)
    if only is not None:
        stages = [s for s in stages if s.name in only]

    manifest = {"tool_version": __version__, "seed": config.seed, "stages": {}}
    for stage in stages:
        key = _stage_key(stage, config.seed)
        prior = previous.get(stage.name)
        outputs_ok = all(p.exists() for p in stage.outputs)
        if (prior and prior.get("key") == key and outputs_ok
                and prior.get("outputs") == {p.name: file_digest(p) for p in stage.outputs}):
            log.info("stage %s: up to date, skipped", stage.name)
            manifest["stages"][stage.name] = {**prior, "skipped": True}
            previous = {**previous, **manifest["stages"]}
            continue
        log.info("stage %s: running", stage.name)
        started = time.monotonic()
        try:
            stage.run()
        except Exception as exc:
            manifest["stages"][stage.name] = {"key": key, "failed": str(exc)}
            _write_json(manifest, manifest_path)
            raise StageFailure(stage.name, exc) from exc
        record = {
            "key": key,
            "skipped": False,
            "duration_s": round(time.monotonic() - started, 3),
            "outputs": {p.name: file_digest(p) for p in stage.outputs},
        }
        manifest["stages"][stage.name] = record
        previous[stage.name] = record

    merged = {"tool_version": __version__, "seed": config.seed,
              "stages": {**previous, **manifest["stages"]}}
    _write_json(merged, manifest_path)
    return merged
