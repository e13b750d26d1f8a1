"""Tokenization, binary bag-of-words vectors, cosine, and pair serialization."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

_TOKEN_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def corpus_fingerprint(texts: Iterable[str]) -> str:
    digest = hashlib.sha256()
    for text in texts:
        digest.update(text.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


@dataclass(frozen=True)
class Vocabulary:
    index: dict  # term -> position, lexicographic term order
    source_fingerprint: str

    @property
    def size(self) -> int:
        return len(self.index)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def terms(self) -> list[str]:
        return sorted(self.index, key=self.index.get)


def build_vocabulary(texts: Sequence[str], min_df: int = 2) -> Vocabulary:
    """All tokens with document frequency >= min_df, lexicographically indexed."""
    df: dict[str, int] = {}
    for text in texts:
        for term in set(tokenize(text)):
            df[term] = df.get(term, 0) + 1
    kept = sorted(t for t, n in df.items() if n >= min_df)
    if not kept:
        raise ValueError("empty vocabulary: no term reaches the document-frequency cutoff")
    return Vocabulary(
        index={t: i for i, t in enumerate(kept)},
        source_fingerprint=corpus_fingerprint(texts),
    )


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, weight) pairs over a fixed dimension."""

    entries: tuple  # ((index, weight), ...) with strictly increasing indices
    dimension: int

    def __post_init__(self):
        last = -1
        for index, weight in self.entries:
            if index <= last or index >= self.dimension:
                raise ValueError("indices must be strictly increasing and < dimension")
            if weight < 0:
                raise ValueError("weights must be non-negative")
            last = index

    def norm(self) -> float:
        return math.sqrt(sum(w * w for _, w in self.entries))

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)


def vectorize(text: str, vocab: Vocabulary) -> SparseVector:
    """Binary indicator vector of the in-vocabulary tokens of a text."""
    present = {vocab.index[t] for t in tokenize(text) if t in vocab.index}
    return SparseVector(tuple((i, 1.0) for i in sorted(present)), vocab.size)


def mean_vector(vectors: Sequence[SparseVector]) -> SparseVector:
    """Arithmetic mean of sparse vectors (the cluster centroid)."""
    if not vectors:
        raise ValueError("mean of zero vectors")
    dimension = vectors[0].dimension
    acc: dict[int, float] = {}
    for vec in vectors:
        if vec.dimension != dimension:
            raise ValueError("dimension mismatch")
        for index, weight in vec.entries:
            acc[index] = acc.get(index, 0.0) + weight
    n = len(vectors)
    return SparseVector(tuple((i, acc[i] / n) for i in sorted(acc)), dimension)


def cosine_similarity(u: SparseVector, v: SparseVector) -> float:
    if u.dimension != v.dimension:
        raise ValueError("dimension mismatch")
    du = u.as_dict()
    dot = sum(w * du[i] for i, w in v.entries if i in du)
    nu, nv = u.norm(), v.norm()
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return min(1.0, dot / (nu * nv))


@dataclass(frozen=True)
class SerializedPair:
    pair_id: str
    text_a: str
    text_b: str
    label: str  # match | non_match


def cooccurrence_vector(pair: SerializedPair, vocab: Vocabulary) -> SparseVector:
    """Binary vector marking vocabulary terms present in both pair texts."""
    shared = set(tokenize(pair.text_a)) & set(tokenize(pair.text_b))
    present = sorted(vocab.index[t] for t in shared if t in vocab.index)
    return SparseVector(tuple((i, 1.0) for i in present), vocab.size)


def serialize_pair_record(pair: SerializedPair) -> str:
    """One line of the transformer export file; field order is fixed."""
    record = {
        "pair_id": pair.pair_id,
        "text_a": pair.text_a,
        "text_b": pair.text_b,
        "label": pair.label,
    }
    return json.dumps(record, ensure_ascii=False)


def parse_pair_record(line: str) -> SerializedPair:
    obj = json.loads(line)
    return SerializedPair(obj["pair_id"], obj["text_a"], obj["text_b"], obj["label"])


def write_pair_export(pairs: Iterable[SerializedPair], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(serialize_pair_record(pair) + "\n")
            count += 1
    return count


def read_pair_export(path) -> list[SerializedPair]:
    with open(path, encoding="utf-8") as fh:
        return [parse_pair_record(line) for line in fh if line.strip()]


def write_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# size={vocab.size} fingerprint={vocab.source_fingerprint}\n")
        for term in vocab.terms():
            fh.write(term + "\n")


def read_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.lstrip("# ").split())
        terms = [line.rstrip("\n") for line in fh if line.strip()]
    vocab = Vocabulary(index={t: i for i, t in enumerate(terms)}, source_fingerprint=fields["fingerprint"])
    if vocab.size != int(fields["size"]):
        raise ValueError("vocabulary size header disagrees with term count")
    return vocab
