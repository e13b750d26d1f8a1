"""Acceptance suite: one test per criterion, printing a pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import json
import math
import time
from itertools import combinations

import pytest

from offermatch.clustering import cluster_offers
from offermatch.grid import (
    GridConfig,
    GridResult,
    baseline_trainer,
    render_with_without_report,
    run_grid,
)
from offermatch.metrics import ConfusionCounts, MetricSet, confusion, prf1
from offermatch.pairs import (
    CORNER,
    MATCH,
    NON_MATCH,
    RANDOM,
    DatasetSplit,
    OfferPair,
    assemble_split,
    compose_training_mix,
    generate_negative_pairs,
    generate_positive_pairs,
    label_hardness,
    leakage_check,
    read_pairs,
)
from offermatch.pipeline import PipelineConfig, file_digest, run_pipeline
from offermatch.seeding import rng_for
from offermatch.synthetic import separable_matching_task, synthetic_corpus
from offermatch.textvec import tokenize


def report(criterion: str, ok: bool):
    print(f"{'PASS' if ok else 'FAIL'}: {criterion}")
    assert ok, criterion


PIPELINE_CONFIG = {
    "input": {"synthetic": {"n_products": 12, "per_language": {"de": 3, "en": 2},
                            "seed": 7}},
    "seed": 1,
    "test_size": 20,
    "test_match_ratio": 0.25,
    "n_target": 24,
    "n_aux": 8,
    "baseline": {"lambda": 0.0001, "epochs": 40},
}


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance")
    config_path = tmp / "config.json"
    config_path.write_text(json.dumps(PIPELINE_CONFIG))
    config = PipelineConfig.load(config_path)
    out = tmp / "out"
    run_pipeline(config, out)
    return config, out


def dense_vectors(stripped, vocab_size_hint=None):
    """Independent dense binary vectors over the df>=2 token space."""
    df = {}
    texts = {oid: o.text() for oid, o in stripped.items()}
    for text in texts.values():
        for token in set(tokenize(text)):
            df[token] = df.get(token, 0) + 1
    terms = sorted(t for t, n in df.items() if n >= 2)
    index = {t: i for i, t in enumerate(terms)}
    out = {}
    for oid, text in texts.items():
        vec = [0.0] * len(terms)
        for token in set(tokenize(text)):
            if token in index:
                vec[index[token]] = 1.0
        out[oid] = vec
    return out


def dense_cos(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv) if nu and nv else 0.0


def test_pair_generation_oracle_equivalence(stripped, mining_vectors):
    started = time.monotonic()
    corpus = synthetic_corpus()
    assert len(corpus) == 60
    clusters = cluster_offers(corpus).clusters
    assert len(clusters) == 12
    languages = {o.language for o in corpus}
    assert languages == {"de", "en"}

    lookup = mining_vectors.__getitem__
    k_similar, quota, cap = 3, 10_000, 10_000
    positives = []
    for cluster in clusters:
        positives += generate_positive_pairs(cluster, lookup, cap, seed=1)
    negatives, _ = generate_negative_pairs(clusters, lookup, k_similar, quota)

    # brute-force oracle over all O(n^2) offer pairs, with its own dense math
    dense = dense_vectors(stripped)
    cluster_of = {m: c.cluster_id for c in clusters for m in c.member_offers}
    language = {o.offer_id: o.language for o in corpus}
    expected_pos = set()
    for a, b in combinations(sorted(cluster_of), 2):
        if language[a] == language[b] and cluster_of[a] == cluster_of[b]:
            expected_pos.add(f"{a}|{b}")

    members = {}
    for oid, cid in cluster_of.items():
        members.setdefault((cid, language[oid]), []).append(oid)
    centroid = {
        key: [sum(col) / len(ms) for col in zip(*(dense[m] for m in ms))]
        for key, ms in members.items()
    }
    expected_neg = set()
    for (cid, lang), ms in members.items():
        scored = [
            (dense_cos(centroid[(cid, lang)], centroid[(other, lang)]), other)
            for (other, olang) in members
            if olang == lang and other != cid
        ]
        top = sorted(((s, c) for s, c in scored if s > 0.0),
                     key=lambda sc: (-sc[0], sc[1]))[:k_similar]
        for _, other in top:
            for a in ms:
                for b in members[(other, lang)]:
                    expected_neg.add("|".join(sorted((a, b))))

    elapsed = time.monotonic() - started
    ok = ({p.pair_id for p in positives} == expected_pos
          and {p.pair_id for p in negatives} == expected_neg
          and elapsed < 5.0)
    report("pair-generation oracle equivalence (60 offers, 12 clusters, 2 languages, "
           f"{elapsed:.2f}s)", ok)


def test_leakage_clean_and_injection_detected(pipeline_out):
    config, out = pipeline_out
    test = DatasetSplit.from_pairs("test", read_pairs(out / "test_split.jsonl"), 1)
    pools = {
        "de": DatasetSplit.from_pairs("train_pool", read_pairs(out / "train_pool_de.jsonl"), 1),
        "en": DatasetSplit.from_pairs("train_pool", read_pairs(out / "train_pool_en.jsonl"), 1),
    }
    clean = True
    for n_target, n_aux in [(8, 0), (8, 4), (16, 8), (24, 8)]:
        for seed in (1, 2, 3):
            mix = compose_training_mix(pools["de"], pools["en"], "de", "en",
                                       n_target, n_aux, seed)
            clean &= leakage_check(mix.pairs, test) == []
    mix = compose_training_mix(pools["de"], pools["en"], "de", "en", 8, 0, 1)
    injected = mix.pairs + [test.pairs[0]]
    detected = leakage_check(injected, test) == [test.pairs[0].pair_id]
    report("zero leakage on all pipeline mixes; injected duplicate detected",
           clean and detected)


def big_pool(label, n, language="de", start=0):
    pairs = [
        OfferPair.build(f"{language}{start + i:05d}a", f"{language}{start + i:05d}b",
                        label, (start + i) % 97 / 97.0, language)
        for i in range(n)
    ]
    return label_hardness(pairs, 0.5)


def test_composition_exactness():
    split = assemble_split(big_pool(MATCH, 800), big_pool(NON_MATCH, 1900, start=3000),
                           1200, 0.25, 0.5, seed=5)
    labels = [p.label for p in split.pairs]
    split_ok = (len(split.pairs) == 1200 and labels.count(MATCH) == 300
                and labels.count(NON_MATCH) == 900)

    def pool(language, n):
        return DatasetSplit.from_pairs(
            "train_pool",
            big_pool(MATCH, n // 2, language) + big_pool(NON_MATCH, n // 2, language, n),
            1)

    mix = compose_training_mix(pool("de", 4000), pool("en", 16000), "de", "en",
                               1800, 7200, seed=5)
    matches = sum(1 for p in mix.pairs if p.label == MATCH)
    mix_ok = len(mix.pairs) == 9000 and matches == 4500
    report("composition exactness: 1200@0.25 -> 300/900; mix(1800,7200) -> 9000/4500",
           split_ok and mix_ok)


def test_corner_case_extremality_100_pools():
    ok = True
    checked = 0
    for trial in range(100):
        rng = rng_for("acceptance-extremality", trial)
        n = rng.randint(2, 80)
        fraction = rng.random()
        pairs = [
            OfferPair.build(f"x{i:03d}", f"y{i:03d}",
                            MATCH if rng.random() < 0.5 else NON_MATCH,
                            rng.random(), "de")
            for i in range(n)
        ]
        tagged = label_hardness(pairs, fraction)
        for label, hard_is_high in ((NON_MATCH, True), (MATCH, False)):
            corner = [p.similarity for p in tagged
                      if p.label == label and p.hardness == CORNER]
            rand = [p.similarity for p in tagged
                    if p.label == label and p.hardness == RANDOM]
            if corner and rand:
                checked += 1
                if hard_is_high:
                    ok &= min(corner) >= max(rand)
                else:
                    ok &= max(corner) <= min(rand)
    report(f"corner-case extremality on 100 randomized pools ({checked} strata)", ok)


def test_metric_oracle():
    worked = prf1(ConfusionCounts(tp=3, fp=1, fn=1)) == MetricSet(0.75, 0.75, 0.75)
    ok = worked
    for trial in range(1000):
        rng = rng_for("acceptance-prf1", trial)
        n = rng.randint(1, 40)
        gold = [rng.choice((MATCH, NON_MATCH)) for _ in range(n)]
        pred = [rng.choice((MATCH, NON_MATCH)) for _ in range(n)]
        tp = sum(p == g == MATCH for p, g in zip(pred, gold))
        fp = sum(p == MATCH and g == NON_MATCH for p, g in zip(pred, gold))
        fn = sum(p == NON_MATCH and g == MATCH for p, g in zip(pred, gold))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        ok &= prf1(confusion(pred, gold)) == MetricSet(precision, recall, f1)
    report("metric oracle: prf1 matches brute force on 1000 samples + worked case", ok)


def test_delta_column_and_table1_rendering(tmp_path):
    rows = [450, 900, 1800, 3600]
    cols = [0, 450, 900, 1800, 3600, 7200]
    table = [
        [67.11, 72.79, 75.44, 80.83, 86.82, 87.97],
        [75.76, 75.10, 74.00, 87.67, 88.92, 88.19],
        [87.69, 88.43, 88.38, 90.17, 90.72, 91.44],
        [93.63, 92.98, 92.46, 93.97, 93.25, 94.46],
    ]
    published_deltas = [20.86, 12.43, 3.75, 0.83]
    cells = {}
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            m = MetricSet(0, 0, table[i][j] / 100.0)
            cells[(r, c)] = {"runs": [m], "mean": m}
    result = GridResult.from_cells(rows, cols, cells)
    deltas_ok = all(
        abs(100.0 * result.deltas[r] - expected) <= 0.01
        for r, expected in zip(rows, published_deltas)
    )
    csv_path, _ = render_with_without_report({"mBERT": (0.8769, 0.9144)},
                                             tmp_path / "table1")
    line = csv_path.read_text().splitlines()[1]
    render_ok = line == "mBERT,87.69,91.44,3.75"
    report("delta column reproduces 20.86/12.43/3.75/0.83; mBERT difference 3.75",
           deltas_ok and render_ok)


def test_baseline_competence():
    started = time.monotonic()
    offers, train, test = separable_matching_task()
    assert len(train) == 400 and len(test.pairs) == 200
    metrics = baseline_trainer(offers)(train, [], test)
    elapsed = time.monotonic() - started
    ok = metrics.f1 >= 0.95 and elapsed < 10.0
    report(f"baseline competence: F1 {metrics.f1:.3f} >= 0.95 in {elapsed:.2f}s", ok)


def _digests(out):
    return {
        str(p.relative_to(out)): file_digest(p)
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != "run_manifest.json"
    }


def test_end_to_end_determinism(pipeline_out, tmp_path):
    config, out = pipeline_out
    first = _digests(out)
    rerun = tmp_path / "rerun"
    run_pipeline(config, rerun)
    config.workers = 4
    threaded = tmp_path / "threaded"
    run_pipeline(config, threaded)
    ok = first == _digests(rerun) == _digests(threaded)
    report("end-to-end determinism: byte-identical artifacts across runs and "
           "worker counts", ok)


def test_grid_mechanics(pipeline_out, tmp_path):
    started = time.monotonic()
    config, out = pipeline_out
    pools = {
        "de": DatasetSplit.from_pairs("train_pool", read_pairs(out / "train_pool_de.jsonl"), 1),
        "en": DatasetSplit.from_pairs("train_pool", read_pairs(out / "train_pool_en.jsonl"), 1),
    }
    test = DatasetSplit.from_pairs("test", read_pairs(out / "test_split.jsonl"), 1)
    offers = {}
    from offermatch.pipeline import read_offers
    for o in read_offers(out / "offers_stripped.jsonl"):
        offers[o.offer_id] = o
    grid_config = GridConfig(rows=[8, 16], cols=[0, 4, 8], seeds=[1, 2, 3])
    result = run_grid(pools["de"], pools["en"], test, grid_config,
                      baseline_trainer(offers), out_dir=tmp_path / "cells")
    cells_ok = (len(result.cells) == 6
                and all(len(cell["runs"]) == 3 for cell in result.cells.values()))
    nested_ok = True
    for r in grid_config.rows:
        for seed in grid_config.seeds:
            previous = None
            for c in grid_config.cols:
                mix = compose_training_mix(pools["de"], pools["en"], "de", "en",
                                           r, c, seed)
                ids = {p.pair_id for p in mix.pairs}
                if previous is not None:
                    nested_ok &= previous <= ids
                previous = ids
    elapsed = time.monotonic() - started
    ok = cells_ok and nested_ok and elapsed < 60.0
    report(f"grid mechanics: 2x3 grid, 6 cells x 3 seeds, nested mixes, {elapsed:.2f}s",
           ok)
