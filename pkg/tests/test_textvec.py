import math

import pytest
from hypothesis import given, strategies as st

from offermatch.textvec import (
    SerializedPair,
    SparseVector,
    build_vocabulary,
    cooccurrence_vector,
    cosine_similarity,
    mean_vector,
    parse_pair_record,
    read_pair_export,
    read_vocabulary,
    serialize_pair_record,
    tokenize,
    vectorize,
    write_pair_export,
    write_vocabulary,
)


class TestTokenize:
    def test_basic(self):
        assert tokenize("Galaxy S8 64GB") == ["galaxy", "s8", "64gb"]

    def test_empty(self):
        assert tokenize("") == []

    def test_separators(self):
        assert tokenize("iPhone-X/Schwarz") == ["iphone", "x", "schwarz"]

    def test_punctuation_only(self):
        assert tokenize("!!! --- ...") == []

    def test_unicode_lowercasing(self):
        assert tokenize("Grün ÖLFREI") == ["grün", "ölfrei"]

    @given(st.text(max_size=60))
    def test_join_idempotence(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens


class TestVocabulary:
    def test_df_cutoff(self):
        vocab = build_vocabulary(["a b", "b c"])
        assert list(vocab.index) == ["b"] and vocab.size == 1

    def test_repeated_documents(self):
        vocab = build_vocabulary(["a b", "a b"])
        assert list(vocab.index) == ["a", "b"]

    def test_disjoint_singletons_hard_error(self):
        with pytest.raises(ValueError, match="vocabulary"):
            build_vocabulary(["a", "b", "c"])

    def test_lexicographic_dense_indices(self):
        vocab = build_vocabulary(["z y x", "x y z"])
        assert vocab.index == {"x": 0, "y": 1, "z": 2}

    def test_determinism(self):
        texts = ["alpha beta", "beta gamma", "gamma alpha"]
        assert build_vocabulary(texts) == build_vocabulary(list(texts))

    def test_roundtrip(self, tmp_path):
        vocab = build_vocabulary(["a b", "a b c", "c d", "d a"])
        path = tmp_path / "vocab.txt"
        write_vocabulary(vocab, path)
        loaded = read_vocabulary(path)
        assert loaded == vocab


class TestVectors:
    def test_binary_indicator(self):
        vocab = build_vocabulary(["a b", "a b"])
        vec = vectorize("b b z", vocab)
        assert vec.entries == ((1, 1.0),)

    def test_out_of_vocab_only(self):
        vocab = build_vocabulary(["a b", "a b"])
        assert vectorize("z q", vocab).entries == ()

    def test_full_coverage(self):
        vocab = build_vocabulary(["a b", "a b"])
        assert vectorize("a b", vocab).entries == ((0, 1.0), (1, 1.0))

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SparseVector(((1, 1.0), (0, 1.0)), 3)
        with pytest.raises(ValueError):
            SparseVector(((5, 1.0),), 3)
        with pytest.raises(ValueError):
            SparseVector(((0, -1.0),), 3)

    def test_mean_vector(self):
        u = SparseVector(((0, 1.0),), 2)
        v = SparseVector(((0, 1.0), (1, 1.0)), 2)
        assert mean_vector([u, v]).entries == ((0, 1.0), (1, 0.5))


def binary_vec(indices, dim):
    return SparseVector(tuple((i, 1.0) for i in sorted(indices)), dim)


class TestCosine:
    def test_identical(self):
        u = binary_vec({0, 2}, 4)
        assert cosine_similarity(u, u) == pytest.approx(1.0)

    def test_disjoint(self):
        assert cosine_similarity(binary_vec({0}, 4), binary_vec({1}, 4)) == 0.0

    def test_half_overlap(self):
        u = binary_vec({0, 1}, 3)
        v = binary_vec({0, 2}, 3)
        assert cosine_similarity(u, v) == pytest.approx(0.5)

    def test_zero_vector(self):
        assert cosine_similarity(binary_vec(set(), 3), binary_vec({0}, 3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity(binary_vec({0}, 3), binary_vec({0}, 4))

    @given(st.sets(st.integers(0, 15)), st.sets(st.integers(0, 15)))
    def test_symmetric_and_bounded(self, a, b):
        u, v = binary_vec(a, 16), binary_vec(b, 16)
        forward = cosine_similarity(u, v)
        assert forward == cosine_similarity(v, u)
        assert 0.0 <= forward <= 1.0

    @given(st.sets(st.integers(0, 15)))
    def test_against_dense_oracle(self, a):
        b = {i + 3 for i in a if i < 13} | {1}
        u, v = binary_vec(a, 16), binary_vec(b, 16)
        du = [1.0 if i in a else 0.0 for i in range(16)]
        dv = [1.0 if i in b else 0.0 for i in range(16)]
        dot = sum(x * y for x, y in zip(du, dv))
        norm = math.sqrt(sum(du)) * math.sqrt(sum(dv))
        expected = dot / norm if norm else 0.0
        assert cosine_similarity(u, v) == pytest.approx(expected)


class TestCooccurrence:
    def test_intersection(self):
        vocab = build_vocabulary(["apple iphone x", "apple iphone xs"])
        pair = SerializedPair("p", "apple iphone x", "apple iphone xs", "match")
        vec = cooccurrence_vector(pair, vocab)
        terms = {t for t, i in vocab.index.items() if (i, 1.0) in vec.entries}
        assert terms == {"apple", "iphone"}

    def test_identical_texts(self):
        vocab = build_vocabulary(["a b c", "a b c"])
        pair = SerializedPair("p", "a b", "a b", "match")
        assert cooccurrence_vector(pair, vocab).entries == ((0, 1.0), (1, 1.0))

    def test_disjoint_texts(self):
        vocab = build_vocabulary(["a b", "a b"])
        pair = SerializedPair("p", "a", "b", "non_match")
        assert cooccurrence_vector(pair, vocab).entries == ()

    def test_symmetry(self):
        vocab = build_vocabulary(["a b c d", "a b c d"])
        fwd = cooccurrence_vector(SerializedPair("p", "a b", "b c", "match"), vocab)
        rev = cooccurrence_vector(SerializedPair("p", "b c", "a b", "match"), vocab)
        assert fwd == rev


class TestSerialization:
    def test_field_order(self):
        line = serialize_pair_record(SerializedPair("a|b", "T1", "T2", "match"))
        assert line.index('"pair_id"') < line.index('"text_a"') < \
               line.index('"text_b"') < line.index('"label"')

    def test_roundtrip(self):
        pair = SerializedPair("a|b", "Grüner Apfel", "green apple", "non_match")
        assert parse_pair_record(serialize_pair_record(pair)) == pair

    def test_export_line_count(self, tmp_path):
        pairs = [SerializedPair(f"a|b{i}", "x", "y", "match") for i in range(7)]
        path = tmp_path / "export.jsonl"
        assert write_pair_export(pairs, path) == 7
        assert len(path.read_text().splitlines()) == 7
        assert read_pair_export(path) == pairs
