"""Identifier normalization and shared-identifier clustering.

Offers are grouped into product clusters as the connected components of
the graph linking any two offers that share a normalized GTIN or MPN.
EAN-13 values are folded into the 14-digit GTIN space.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .records import Offer

_NON_DIGIT = re.compile(r"[^0-9]")
_MPN_SEP = re.compile(r"[\s\-/._]")
_ALNUM = re.compile(r"^[a-z0-9]+$")


class IdentifierRejected(ValueError):
    """Raised when a raw identifier cannot be normalized."""


@dataclass(frozen=True, order=True)
class NormalizedId:
    kind: str  # GTIN | MPN
    value: str

    def key(self) -> str:
        return f"{self.kind}:{self.value}"


def _gtin_check_digit_ok(digits: str) -> bool:
    # mod-10: weights 3,1,3,1,... from the left of the 14-digit form
    total = 0
    for pos, ch in enumerate(digits):
        weight = 3 if pos % 2 == 0 else 1
        total += weight * int(ch)
    return total % 10 == 0


def normalize_identifier(raw: str, kind: str) -> NormalizedId:
    """Canonicalize a raw GTIN/EAN/MPN string.

    GTIN and EAN collapse into one 14-digit space with a mod-10 checksum
    gate; MPNs are lowercased with separators stripped, guarded against
    short and short-numeric values that collide across brands.
    """
    if not raw:
        raise IdentifierRejected("empty identifier")
    kind = kind.upper()
    if kind in ("GTIN", "EAN"):
        digits = _NON_DIGIT.sub("", raw)
        if not digits:
            raise IdentifierRejected("no digits in GTIN/EAN")
        if len(digits) > 14:
            raise IdentifierRejected(f"bad length: {len(digits)} digits")
        digits = digits.zfill(14)
        if not _gtin_check_digit_ok(digits):
            raise IdentifierRejected("failed checksum")
        return NormalizedId("GTIN", digits)
    if kind == "MPN":
        value = _MPN_SEP.sub("", raw.lower())
        if not _ALNUM.match(value):
            raise IdentifierRejected("non-alphanumeric MPN after normalization")
        if len(value) < 4:
            raise IdentifierRejected("too-short MPN")
        if value.isdigit() and len(value) < 6:
            raise IdentifierRejected("numeric-only short MPN")
        return NormalizedId("MPN", value)
    raise IdentifierRejected(f"unknown identifier kind {kind!r}")


def offer_normalized_ids(offer: Offer) -> list[NormalizedId]:
    """All normalizable identifiers of an offer, deduplicated, sorted."""
    ids = set()
    for kind, raw in offer.raw_identifiers():
        try:
            ids.add(normalize_identifier(raw, kind))
        except IdentifierRejected:
            continue
    return sorted(ids)


@dataclass
class ProductCluster:
    cluster_id: str
    member_offers: list[str]  # sorted offer ids
    ids: list[NormalizedId]
    language_partition: dict[str, list[str]] = field(default_factory=dict)

    def members_in(self, language: str) -> list[str]:
        return self.language_partition.get(language, [])


@dataclass
class ClusterResult:
    clusters: list[ProductCluster]
    skipped: list[tuple[str, str]]  # (offer_id, reason)


class UnionFind:
    """Disjoint sets over hashable keys with path compression."""

    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, x):
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic: smaller key becomes the root
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def cluster_offers(offers: Sequence[Offer]) -> ClusterResult:
    """Group offers into connected components linked by shared identifiers."""
    uf = UnionFind()
    by_offer_ids: dict[str, list[NormalizedId]] = {}
    id_owner: dict[NormalizedId, str] = {}
    skipped: list[tuple[str, str]] = []
    languages: dict[str, str] = {}

    for offer in sorted(offers, key=lambda o: o.offer_id):
        norm = offer_normalized_ids(offer)
        if not norm:
            skipped.append((offer.offer_id, "no normalizable identifier"))
            continue
        by_offer_ids[offer.offer_id] = norm
        languages[offer.offer_id] = offer.language
        uf.find(offer.offer_id)
        for nid in norm:
            if nid in id_owner:
                uf.union(id_owner[nid], offer.offer_id)
            else:
                id_owner[nid] = offer.offer_id

    components: dict[str, list[str]] = defaultdict(list)
    for offer_id in by_offer_ids:
        components[uf.find(offer_id)].append(offer_id)

    clusters = []
    for members in components.values():
        members.sort()
        ids = sorted({nid for m in members for nid in by_offer_ids[m]})
        partition: dict[str, list[str]] = defaultdict(list)
        for m in members:
            partition[languages[m]].append(m)
        clusters.append(
            ProductCluster(
                cluster_id=members[0],
                member_offers=members,
                ids=ids,
                language_partition=dict(partition),
            )
        )
    clusters.sort(key=lambda c: c.cluster_id)
    return ClusterResult(clusters, skipped)


def cluster_of(clusters: Iterable[ProductCluster]) -> dict[str, str]:
    """offer_id -> cluster_id lookup."""
    lookup = {}
    for cluster in clusters:
        for member in cluster.member_offers:
            lookup[member] = cluster.cluster_id
    return lookup
