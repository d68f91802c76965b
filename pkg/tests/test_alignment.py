import numpy as np
import pytest

from xlsum.alignment import (
    BilingualLexicon,
    OrthogonalMap,
    apply_map,
    load_lexicon,
    orthogonality_residual,
    pair_matrices,
    precision_at_k,
    procrustes,
    retrieval_report,
    save_lexicon,
)
from xlsum.embeddings import EmbeddingTable, cosine
from xlsum.errors import LexiconFormatError
from xlsum.synthetic import random_orthogonal, rotation_fixture


class TestLexicon:
    def test_dedupe_exact_pairs(self):
        lex = BilingualLexicon([("dog", "pes"), ("dog", "pes"), ("hound", "pes")])
        assert lex.pairs == (("dog", "pes"), ("hound", "pes"))

    def test_file_round_trip(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("# comment\ndog\tpes\n\ncat\tmačka\ndog\tpes\n", encoding="utf-8")
        lex = load_lexicon(p)
        assert lex.pairs == (("dog", "pes"), ("cat", "mačka"))
        q = tmp_path / "e.tsv"
        save_lexicon(lex, q)
        assert load_lexicon(q) == lex

    @pytest.mark.parametrize("line", ["dog pes\n", "dog\tpes\textra\n", "\tpes\n"])
    def test_malformed(self, tmp_path, line):
        p = tmp_path / "bad.tsv"
        p.write_text(line, encoding="utf-8")
        with pytest.raises(LexiconFormatError):
            load_lexicon(p)


class TestPairMatrices:
    def test_drops_oov(self):
        src = EmbeddingTable(["a", "b", "c"], np.eye(3))
        tgt = EmbeddingTable(["x", "y"], np.eye(3)[:2])
        lex = BilingualLexicon([("a", "x"), ("b", "zz"), ("c", "y")])
        X, Y, kept = pair_matrices(lex, tgt, src)
        assert kept == [0, 2] and X.shape == (2, 3)
        np.testing.assert_array_equal(Y[1], src["c"])

    def test_identity(self):
        t = EmbeddingTable(["a", "b"], [[1.0, 2.0], [3.0, 4.0]])
        X, Y, _ = pair_matrices(BilingualLexicon([("a", "a"), ("b", "b")]), t, t)
        np.testing.assert_array_equal(X, Y)

    def test_errors(self):
        t = EmbeddingTable(["a"], [[1.0, 0.0]])
        with pytest.raises(ValueError):
            pair_matrices(BilingualLexicon([("q", "r")]), t, t)
        with pytest.raises(ValueError):
            pair_matrices(BilingualLexicon([("a", "a")]), t, EmbeddingTable(["a"], [[1.0]]))


class TestProcrustes:
    def test_identity_case(self):
        X = np.random.default_rng(0).standard_normal((20, 5))
        np.testing.assert_allclose(procrustes(X, X).W, np.eye(5), atol=1e-8)

    def test_quarter_turn(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        Y = np.array([[0.0, 1.0], [-1.0, 0.0]])
        m = procrustes(X, Y)
        np.testing.assert_allclose(m.W, [[0, 1], [-1, 0]], atol=1e-12)
        np.testing.assert_allclose(X @ m.W, Y, atol=1e-12)
        assert m.train_loss == pytest.approx(0.0, abs=1e-12)

    def test_recovers_rotation(self):
        rng = np.random.default_rng(42)
        R = random_orthogonal(10, rng)
        X = rng.standard_normal((50, 10))
        m = procrustes(X, X @ R)
        assert np.max(np.abs(m.W - R)) <= 1e-6

    def test_optimal_against_random_orthogonal(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            X, Y = rng.standard_normal((30, 8)), rng.standard_normal((30, 8))
            m = procrustes(X, Y)
            assert orthogonality_residual(m.W) <= 1e-6
            losses = [np.linalg.norm(X @ random_orthogonal(8, rng) - Y) for _ in range(200)]
            assert m.train_loss <= min(losses)

    def test_errors(self):
        with pytest.raises(ValueError):
            procrustes(np.full((2, 2), np.nan), np.eye(2))
        with pytest.raises(ValueError):
            procrustes(np.eye(2), np.eye(3))
        with pytest.raises(ValueError):
            OrthogonalMap(np.array([[2.0, 0.0], [0.0, 1.0]]))


class TestApplyMap:
    def test_identity_map(self):
        t = EmbeddingTable(["a", "b"], [[1.0, 2.0], [3.0, -1.0]])
        assert apply_map(OrthogonalMap(np.eye(2)), t) == t

    def test_quarter_turn(self):
        t = EmbeddingTable(["a"], [[1.0, 0.0]])
        out = apply_map(OrthogonalMap(np.array([[0.0, 1.0], [-1.0, 0.0]])), t)
        np.testing.assert_allclose(out["a"], [0.0, 1.0])

    def test_isometry(self):
        rng = np.random.default_rng(9)
        t = EmbeddingTable([f"w{i}" for i in range(100)], rng.standard_normal((100, 6)))
        m = OrthogonalMap(random_orthogonal(6, rng))
        out = apply_map(m, t)
        assert out.tokens == t.tokens
        np.testing.assert_allclose(np.linalg.norm(out.vectors, axis=1), np.linalg.norm(t.vectors, axis=1), atol=1e-9)
        for i in range(0, 100, 7):
            for j in range(1, 100, 11):
                assert abs(cosine(out.vectors[i], out.vectors[j]) - cosine(t.vectors[i], t.vectors[j])) <= 1e-9

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            apply_map(OrthogonalMap(np.eye(3)), EmbeddingTable(["a"], [[1.0, 0.0]]))


class TestRetrieval:
    def test_self_retrieval(self):
        rng = np.random.default_rng(2)
        t = EmbeddingTable([f"w{i}" for i in range(40)], rng.standard_normal((40, 5)))
        lex = BilingualLexicon((w, w) for w in t.tokens)
        assert precision_at_k(t, t, lex, 1) == 1.0

    def test_oov_excluded(self):
        t = EmbeddingTable(["a", "b"], np.eye(2))
        rep = retrieval_report(t, t, BilingualLexicon([("a", "a"), ("zz", "b"), ("b", "qq")]), ks=(1,))
        assert rep.n_evaluated == 1 and rep.n_oov == 2 and rep.precision[1] == 1.0
        with pytest.raises(ValueError):
            precision_at_k(t, t, BilingualLexicon([("zz", "qq")]), 1)

    def test_k_monotone(self):
        tgt, src, lex, R = rotation_fixture(200, 10, seed=1, noise=0.8)
        rep = retrieval_report(apply_map(procrustes(*pair_matrices(lex, tgt, src)[:2]), tgt), src, lex, ks=(1, 5, 10))
        assert rep.precision[1] <= rep.precision[5] <= rep.precision[10]

    def test_invariant_to_rescaling(self):
        tgt, src, lex, _ = rotation_fixture(150, 8, seed=3, noise=0.7)
        mapped = apply_map(procrustes(*pair_matrices(lex, tgt, src)[:2]), tgt)
        scaled = EmbeddingTable(mapped.tokens, mapped.vectors * 3.5)
        for k in (1, 5):
            assert precision_at_k(mapped, src, lex, k) == precision_at_k(scaled, src, lex, k)

    def test_synthetic_rotation(self):
        tgt, src, lex, R = rotation_fixture(200, 10, seed=0)
        m = procrustes(*pair_matrices(lex, tgt, src)[:2])
        assert np.max(np.abs(m.W - R)) <= 1e-6
        assert precision_at_k(apply_map(m, tgt), src, lex, 1) >= 0.99
