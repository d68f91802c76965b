import math
import random
from collections import Counter

import numpy as np
import pytest

from xlsum.embeddings import EmbeddingTable, Vocabulary, build_vocab, cosine, load_vec, restrict, save_vec, unit_norm
from xlsum.errors import VecFormatError
from xlsum.metrics import tokenize

from oracles import naive_counts


@pytest.fixture
def write(tmp_path):
    def _write(text, name="t.vec"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    return _write


class TestLoadVec:
    def test_minimal(self, write):
        t = load_vec(write("2 3\na 1 0 0\nb 0 1 0\n"))
        assert len(t) == 2 and t.dim == 3
        assert t.tokens == ("a", "b")
        np.testing.assert_array_equal(t["b"], [0, 1, 0])
        assert t.vectors.dtype == np.float64

    def test_fasttext_trailing_space_and_no_final_newline(self, write):
        t = load_vec(write("2 2 \nš 0.5 -1 \nb 1e-3 2"))
        assert t.tokens == ("š", "b")
        assert t["b"][0] == 1e-3

    @pytest.mark.parametrize(
        "text, msg",
        [
            ("1 3\na 1 0\n", "components"),
            ("2 2\na 1 0\na 0 1\n", "duplicate"),
            ("2 2\na 1 0\n", "header declares"),
            ("1 2\na 1 0\nb 0 1\n", "more rows"),
            ("x 2\na 1 0\n", "header"),
            ("1\na 1\n", "header"),
            ("1 2\na 1 zero\n", "non-numeric"),
            ("1 2\na 1 nan\n", "non-finite"),
            ("1 2\n 1 0\n", "empty token"),
        ],
    )
    def test_malformed(self, write, text, msg):
        with pytest.raises(VecFormatError, match=msg):
            load_vec(write(text))

    def test_error_carries_line(self, write):
        with pytest.raises(VecFormatError) as ei:
            load_vec(write("2 2\na 1 0\nb 1\n"))
        assert ei.value.line == 3

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        t = EmbeddingTable([f"w{i}" for i in range(50)], rng.standard_normal((50, 7)))
        p = tmp_path / "rt.vec"
        save_vec(t, p)
        assert load_vec(p) == t

    def test_round_trip_printed_precision(self, tmp_path):
        rng = np.random.default_rng(1)
        t = EmbeddingTable(["x", "y"], rng.standard_normal((2, 4)))
        p = tmp_path / "p.vec"
        save_vec(t, p, precision=5)
        back = load_vec(p)
        assert back.tokens == t.tokens
        np.testing.assert_allclose(back.vectors, t.vectors, rtol=1e-4)


class TestTable:
    def test_invariants(self):
        with pytest.raises(ValueError):
            EmbeddingTable(["a", "a"], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            EmbeddingTable([""], [[1.0]])
        with pytest.raises(ValueError):
            EmbeddingTable(["a"], [[np.inf]])
        with pytest.raises(ValueError):
            EmbeddingTable(["a"], [[1.0, 2.0]], dim=3)

    def test_immutable(self):
        t = EmbeddingTable(["a"], [[1.0, 2.0]])
        with pytest.raises(ValueError):
            t.vectors[0, 0] = 5.0

    def test_unit_norm(self):
        t = unit_norm(EmbeddingTable(["a", "b"], [[3.0, 4.0], [0.0, 2.0]]))
        np.testing.assert_allclose(np.linalg.norm(t.vectors, axis=1), 1.0)


class TestCosine:
    def test_values(self):
        v = np.array([0.3, -2.0, 5.0])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-15)
        assert cosine([1, 0], [0, 1]) == 0.0
        assert cosine([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            cosine([0, 0], [1, 0])
        with pytest.raises(ValueError):
            cosine([1, 0], [1, 0, 0])

    def test_symmetric_and_scale_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            u, v = rng.standard_normal(6), rng.standard_normal(6)
            assert cosine(u, v) == cosine(v, u)
            a = float(rng.uniform(1e-3, 1e3))
            assert abs(cosine(a * u, v) - cosine(u, v)) <= 1e-12
            assert -1.0 <= cosine(u, u * 1e-200 * 1e200) <= 1.0


class TestVocab:
    def test_top1(self):
        assert build_vocab(["a a b"], 1).entries == (("a", 2),)

    def test_tie_lexicographic(self):
        assert build_vocab(["a b", "b c"], 2).entries == (("b", 2), ("a", 1))

    def test_fewer_than_k(self):
        assert len(build_vocab(["x y"], 30000)) == 2
        assert len(build_vocab([], 5)) == 0
        with pytest.raises(ValueError):
            build_vocab(["a"], 0)

    def test_matches_naive_recount(self):
        rng = random.Random(11)
        words = ["Ana", "ima", "mačko", "in", "psa", "2020", "ANA"]
        for _ in range(100):
            texts = [" ".join(rng.choices(words, k=rng.randint(0, 8))) + rng.choice([".", "!", ""])
                     for _ in range(rng.randint(1, 5))]
            counts = naive_counts(texts, lambda t: t.lower().replace(".", " ").replace("!", " ").split())
            v = build_vocab(texts, 100)
            assert dict(v.entries) == counts
            assert [c for _, c in v.entries] == sorted(counts.values(), reverse=True)

    def test_vocab_invariants(self):
        with pytest.raises(ValueError):
            Vocabulary((("a", 1), ("b", 2)))
        with pytest.raises(ValueError):
            Vocabulary((("a", 1), ("a", 1)))


class TestRestrict:
    def table(self):
        return EmbeddingTable(["a", "b", "c"], np.eye(3))

    def test_subset(self):
        assert restrict(self.table(), Vocabulary((("b", 1),))).tokens == ("b",)

    def test_disjoint(self):
        out = restrict(self.table(), ["x"])
        assert len(out) == 0 and out.dim == 3

    def test_vocab_order(self):
        out = restrict(EmbeddingTable(["a", "b"], np.eye(2)), Vocabulary((("b", 5), ("a", 1))))
        assert out.tokens == ("b", "a")
        np.testing.assert_array_equal(out["b"], [0, 1])
