from __future__ import annotations

import pytest

from offermatch.clustering import cluster_offers
from offermatch.pairs import identifier_variants, strip_identifiers
from offermatch.synthetic import synthetic_corpus
from offermatch.textvec import build_vocabulary, vectorize


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus()


@pytest.fixture(scope="session")
def clusters(corpus):
    result = cluster_offers(corpus)
    assert not result.skipped
    return result.clusters


@pytest.fixture(scope="session")
def stripped(corpus, clusters):
    offers = {o.offer_id: o for o in corpus}
    out = {}
    for cluster in clusters:
        variants = set()
        for member in cluster.member_offers:
            variants |= identifier_variants(offers[member])
        for member in cluster.member_offers:
            out[member] = strip_identifiers(offers[member], variants)
    return out


@pytest.fixture(scope="session")
def mining_vectors(stripped):
    vocab = build_vocabulary([o.text() for o in stripped.values()], min_df=2)
    return {oid: vectorize(o.text(), vocab) for oid, o in stripped.items()}
