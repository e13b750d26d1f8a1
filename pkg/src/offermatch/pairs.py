"""Labeled pair construction: positives from clusters, negatives across
similar clusters, identifier stripping, corner-case mining, and split
assembly with leakage guarantees."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .clustering import ProductCluster, offer_normalized_ids
from .records import Offer, collapse_whitespace
from .seeding import rng_for
from .textvec import SparseVector, cosine_similarity, mean_vector

MATCH = "match"
NON_MATCH = "non_match"
CORNER = "corner_case"
RANDOM = "random"


def make_pair_id(offer_a: str, offer_b: str) -> str:
    a, b = sorted((offer_a, offer_b))
    return f"{a}|{b}"


@dataclass(frozen=True)
class OfferPair:
    pair_id: str
    offer_a: str
    offer_b: str
    label: str
    hardness: str = RANDOM
    similarity: float = 0.0
    language: str = ""

    @classmethod
    def build(cls, offer_a: str, offer_b: str, label: str, similarity: float, language: str,
              hardness: str = RANDOM) -> "OfferPair":
        a, b = sorted((offer_a, offer_b))
        return cls(f"{a}|{b}", a, b, label, hardness, similarity, language)


@dataclass
class DatasetSplit:
    role: str  # train_pool | validation | test
    pairs: list[OfferPair]
    match_ratio: float
    per_language_counts: dict[str, int]
    seed: int

    @classmethod
    def from_pairs(cls, role: str, pairs: Sequence[OfferPair], seed: int) -> "DatasetSplit":
        pairs = list(pairs)
        matches = sum(1 for p in pairs if p.label == MATCH)
        counts: dict[str, int] = {}
        for p in pairs:
            counts[p.language] = counts.get(p.language, 0) + 1
        ratio = matches / len(pairs) if pairs else 0.0
        return cls(role, pairs, ratio, counts, seed)


@dataclass
class TrainingMix:
    target_language: str
    n_target: int
    auxiliary_language: str
    n_auxiliary: int
    pairs: list[OfferPair]
    seed: int


# --------------------------------------------------------------------------- #
# identifier stripping
# --------------------------------------------------------------------------- #

_SEPARATORS = re.compile(r"[\s\-/._]")


def identifier_variants(offer: Offer) -> set[str]:
    """Raw and normalized identifier strings of an offer, plus
    separator-stripped forms, used for text scrubbing."""
    variants: set[str] = set()
    for _, raw in offer.raw_identifiers():
        variants.add(raw)
        variants.add(_SEPARATORS.sub("", raw))
    for nid in offer_normalized_ids(offer):
        variants.add(nid.value)
        if nid.kind == "GTIN":
            variants.add(nid.value.lstrip("0"))
    return {v for v in variants if v}


def strip_identifiers(offer: Offer, ids: set[str] | None = None) -> Offer:
    """Delete every identifier occurrence from title and description.

    Matching is case-insensitive and covers the separator-stripped form of
    each identifier; digit groups broken up by extra whitespace survive.
    The identifier fields are cleared on the returned copy.
    """
    if ids is None:
        ids = identifier_variants(offer)
    variants = sorted((v for v in ids if v), key=len, reverse=True)
    title, description = offer.title, offer.description
    if variants:
        pattern = re.compile("|".join(re.escape(v) for v in variants), re.IGNORECASE)
        title = pattern.sub(" ", title)
        description = pattern.sub(" ", description)
    return replace(
        offer,
        title=collapse_whitespace(title),
        description=collapse_whitespace(description),
        gtin=None,
        ean=None,
        mpn=None,
    )


# --------------------------------------------------------------------------- #
# pair generation
# --------------------------------------------------------------------------- #

VectorLookup = Callable[[str], SparseVector]


def _pair_similarity(vectors: VectorLookup, a: str, b: str) -> float:
    return cosine_similarity(vectors(a), vectors(b))


def generate_positive_pairs(
    cluster: ProductCluster,
    vectors: VectorLookup,
    cap_per_cluster: int = 30,
    seed: int = 1,
) -> list[OfferPair]:
    """All unordered same-language member pairs of a cluster, labeled match.

    When a language partition yields more than cap_per_cluster pairs, a
    seed-deterministic uniform subsample of that size is kept.
    """
    pairs: list[OfferPair] = []
    for language in sorted(cluster.language_partition):
        members = sorted(cluster.language_partition[language])
        if len(members) < 2:
            continue
        candidates = [
            OfferPair.build(a, b, MATCH, _pair_similarity(vectors, a, b), language)
            for a, b in combinations(members, 2)
        ]
        candidates.sort(key=lambda p: p.pair_id)
        if len(candidates) > cap_per_cluster:
            rng = rng_for(seed, "positives", cluster.cluster_id, language)
            candidates = sorted(rng.sample(candidates, cap_per_cluster), key=lambda p: p.pair_id)
        pairs.extend(candidates)
    pairs.sort(key=lambda p: p.pair_id)
    return pairs


def generate_negative_pairs(
    clusters: Sequence[ProductCluster],
    vectors: VectorLookup,
    k_similar: int = 5,
    per_cluster_quota: int = 30,
) -> tuple[list[OfferPair], list[str]]:
    """Pair each cluster's offers with offers of its most similar other
    clusters (by centroid cosine), labeled non_match.

    Returns the deduplicated, pair_id-sorted pairs and a report of
    clusters with fewer than k_similar same-language neighbors.
    """
    report: list[str] = []
    by_language: dict[str, list[ProductCluster]] = {}
    for cluster in clusters:
        for language in cluster.language_partition:
            by_language.setdefault(language, []).append(cluster)

    collected: dict[str, OfferPair] = {}
    for language in sorted(by_language):
        group = sorted(by_language[language], key=lambda c: c.cluster_id)
        if len(group) < 2:
            for cluster in group:
                report.append(f"{cluster.cluster_id}/{language}: no other cluster in language")
            continue
        centroids = {
            c.cluster_id: mean_vector([vectors(m) for m in c.members_in(language)])
            for c in group
        }
        members = {c.cluster_id: sorted(c.members_in(language)) for c in group}
        for cluster in group:
            # a zero-cosine centroid carries no similarity evidence, so such
            # clusters never become negative partners
            scored = [
                (cosine_similarity(centroids[cluster.cluster_id], centroids[c.cluster_id]), c)
                for c in group
                if c.cluster_id != cluster.cluster_id
            ]
            scored = [(s, c) for s, c in scored if s > 0.0]
            if len(scored) < k_similar:
                report.append(
                    f"{cluster.cluster_id}/{language}: only {len(scored)} similar "
                    f"neighbors for k={k_similar}"
                )
            ranked = [c for _, c in sorted(scored, key=lambda sc: (-sc[0], sc[1].cluster_id))]
            ranked = ranked[:k_similar]
            taken = 0
            for neighbor in ranked:
                if taken >= per_cluster_quota:
                    break
                candidates = sorted(
                    (make_pair_id(a, b), a, b)
                    for a in members[cluster.cluster_id]
                    for b in members[neighbor.cluster_id]
                )
                for _, a, b in candidates:
                    if taken >= per_cluster_quota:
                        break
                    pair = OfferPair.build(a, b, NON_MATCH, _pair_similarity(vectors, a, b), language)
                    collected.setdefault(pair.pair_id, pair)
                    taken += 1
    pairs = [collected[k] for k in sorted(collected)]
    return pairs, report


def label_hardness(pairs: Sequence[OfferPair], corner_fraction: float) -> list[OfferPair]:
    """Tag the hardest corner_fraction of each class as corner cases.

    Hard negatives are the most similar non-matches; hard positives the
    least similar matches. Ties break by pair_id.
    """
    if not 0.0 <= corner_fraction <= 1.0:
        raise ValueError("corner_fraction must be within [0, 1]")
    out: dict[str, OfferPair] = {}
    for label in (MATCH, NON_MATCH):
        group = [p for p in pairs if p.label == label]
        n_corner = int(len(group) * corner_fraction + 0.5)
        if label == NON_MATCH:
            group.sort(key=lambda p: (-p.similarity, p.pair_id))
        else:
            group.sort(key=lambda p: (p.similarity, p.pair_id))
        for position, pair in enumerate(group):
            hardness = CORNER if position < n_corner else RANDOM
            out[pair.pair_id] = replace(pair, hardness=hardness)
    return [out[p.pair_id] for p in pairs]


# --------------------------------------------------------------------------- #
# split assembly
# --------------------------------------------------------------------------- #


class PoolExhausted(ValueError):
    """Raised when a stratum cannot supply the requested number of pairs."""


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def _draw(pool: list[OfferPair], n: int, stratum: str, rng) -> list[OfferPair]:
    if len(pool) < n:
        raise PoolExhausted(f"stratum {stratum}: need {n}, have {len(pool)} (short {n - len(pool)})")
    ordered = sorted(pool, key=lambda p: p.pair_id)
    return rng.sample(ordered, n)


def assemble_split(
    pos_pool: Sequence[OfferPair],
    neg_pool: Sequence[OfferPair],
    size: int,
    match_ratio: float,
    corner_fraction: float,
    seed: int,
    role: str = "test",
) -> DatasetSplit:
    """Draw an exactly sized, ratio-exact split from hardness-tagged pools."""
    n_match = _round_half_up(size * match_ratio)
    n_non = size - n_match
    selected: list[OfferPair] = []
    for label, pool, n_class in ((MATCH, pos_pool, n_match), (NON_MATCH, neg_pool, n_non)):
        n_corner = _round_half_up(n_class * corner_fraction)
        n_random = n_class - n_corner
        corner = [p for p in pool if p.hardness == CORNER]
        rand = [p for p in pool if p.hardness == RANDOM]
        rng = rng_for(seed, "split", role, label)
        selected += _draw(corner, n_corner, f"{label}/{CORNER}", rng)
        selected += _draw(rand, n_random, f"{label}/{RANDOM}", rng)
    selected.sort(key=lambda p: p.pair_id)
    rng_for(seed, "split-order", role).shuffle(selected)
    return DatasetSplit.from_pairs(role, selected, seed)


def _balanced_prefix(pool: Sequence[OfferPair], n: int, language: str, seed: int) -> list[OfferPair]:
    """First n pairs of the seed-shuffled class-balanced ordering.

    Prefixes are nested: the selection for n is a subset of the selection
    for any larger n under the same seed.
    """
    matches = sorted((p for p in pool if p.label == MATCH), key=lambda p: p.pair_id)
    nons = sorted((p for p in pool if p.label == NON_MATCH), key=lambda p: p.pair_id)
    rng_for(seed, "mix", language, MATCH).shuffle(matches)
    rng_for(seed, "mix", language, NON_MATCH).shuffle(nons)
    n_match = (n + 1) // 2
    n_non = n // 2
    if len(matches) < n_match or len(nons) < n_non:
        raise PoolExhausted(
            f"language {language}: need {n_match}+{n_non} match/non_match, "
            f"have {len(matches)}+{len(nons)}"
        )
    return matches[:n_match] + nons[:n_non]


def compose_training_mix(
    target_pool: DatasetSplit,
    aux_pool: DatasetSplit,
    target_language: str,
    aux_language: str,
    n_target: int,
    n_aux: int,
    seed: int,
) -> TrainingMix:
    """Class-balanced, seed-deterministic, size-nested bilingual mix."""
    target = _balanced_prefix([p for p in target_pool.pairs if p.language == target_language],
                              n_target, target_language, seed)
    aux = []
    if n_aux > 0:
        aux = _balanced_prefix([p for p in aux_pool.pairs if p.language == aux_language],
                               n_aux, aux_language, seed)
    pairs = sorted(target + aux, key=lambda p: p.pair_id)
    return TrainingMix(target_language, n_target, aux_language, n_aux, pairs, seed)


def carve_validation(pairs: Sequence[OfferPair], fraction: float, seed: int
                     ) -> tuple[list[OfferPair], list[OfferPair]]:
    """Split off a validation set, stratified by (language, label)."""
    strata: dict[tuple[str, str], list[OfferPair]] = {}
    for pair in pairs:
        strata.setdefault((pair.language, pair.label), []).append(pair)
    train: list[OfferPair] = []
    val: list[OfferPair] = []
    for key in sorted(strata):
        group = sorted(strata[key], key=lambda p: p.pair_id)
        rng_for(seed, "validation", *key).shuffle(group)
        n_val = _round_half_up(len(group) * fraction)
        val += group[:n_val]
        train += group[n_val:]
    train.sort(key=lambda p: p.pair_id)
    val.sort(key=lambda p: p.pair_id)
    return train, val


def leakage_check(train_pairs: Sequence[OfferPair], test: DatasetSplit) -> list[str]:
    """Pair ids occurring in both train and test (order-insensitive)."""
    train_ids = {p.pair_id for p in train_pairs}
    train_offer_pairs = {frozenset((p.offer_a, p.offer_b)) for p in train_pairs}
    violations = []
    for pair in test.pairs:
        if pair.pair_id in train_ids or frozenset((pair.offer_a, pair.offer_b)) in train_offer_pairs:
            violations.append(pair.pair_id)
    return sorted(set(violations))


# --------------------------------------------------------------------------- #
# serialization
# --------------------------------------------------------------------------- #


def pair_to_record(pair: OfferPair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "offer_a": pair.offer_a,
        "offer_b": pair.offer_b,
        "label": pair.label,
        "hardness": pair.hardness,
        "similarity": round(pair.similarity, 10),
        "language": pair.language,
    }


def pair_from_record(obj: dict) -> OfferPair:
    return OfferPair(
        pair_id=obj["pair_id"],
        offer_a=obj["offer_a"],
        offer_b=obj["offer_b"],
        label=obj["label"],
        hardness=obj["hardness"],
        similarity=float(obj["similarity"]),
        language=obj["language"],
    )


def write_pairs(pairs: Iterable[OfferPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False) + "\n")


def read_pairs(path) -> list[OfferPair]:
    with open(path, encoding="utf-8") as fh:
        return [pair_from_record(json.loads(line)) for line in fh if line.strip()]
