import math
import random

import pytest

from xlsum import charlm as clm
from xlsum.charlm import BOS, UNK, CharLM, bits_per_char, corpus_bits_per_char, train
from xlsum.errors import ModelFormatError, ModelVersionError

from oracles import abab_bits_per_char


def random_corpus(seed, n=300):
    rng = random.Random(seed)
    words = ["ljubljana", "maribor", "je", "v", "sloveniji", "tekma", "se", "konča", "3:2", "zmaga"]
    return [" ".join(rng.choices(words, k=rng.randint(3, 9))) + "." for _ in range(n)]


@pytest.fixture(scope="module")
def model():
    return train(random_corpus(0), order=4, seed=1)


class TestUniform:
    def test_binary(self):
        m = CharLM.uniform("ab")
        for text in ("a", "ab", "babba", "ab" * 37):
            assert bits_per_char(m, text).bits_per_char == 1.0

    @pytest.mark.parametrize("size", [3, 5, 7, 26])
    def test_k_ary(self, size):
        syms = "abcdefghijklmnopqrstuvwxyz"[:size]
        m = CharLM.uniform(syms, order=3)
        rng = random.Random(size)
        for n in range(1, 120):
            text = "".join(rng.choices(syms, k=n))
            assert bits_per_char(m, text).bits_per_char == math.log2(size)

    def test_outside_alphabet_without_unk(self):
        with pytest.raises(ValueError):
            bits_per_char(CharLM.uniform("ab"), "abc")


class TestTrain:
    def test_deterministic_transition(self):
        m = train(["ab"] * 100, order=2)
        assert m.prob("b", "a") >= 0.95

    def test_abab_exact(self):
        m = train(["ab" * 50], order=2)
        assert m.discounts == (0.75, 0.75)
        got = bits_per_char(m, "abab").bits_per_char
        assert got == pytest.approx(abab_bits_per_char(), rel=1e-12)
        assert got <= 0.2

    def test_unigram_is_smoothed_relative_frequency(self):
        m = train(["aab"], order=1, min_char_count=1, tune=False)
        # counts a:2 b:1 over symbols {a, b, UNK}
        assert m.prob("a") == pytest.approx((2 - 0.75 + 0.75 * 2 / 3) / 3)
        assert m.prob("b") == pytest.approx((1 - 0.75 + 0.75 * 2 / 3) / 3)
        assert m.prob("z") == pytest.approx(0.75 * 2 / 3 / 3)

    def test_rare_chars_become_unk(self):
        m = train(["aaaa", "aaaq"], order=1, min_char_count=2)
        assert "q" not in m.symbols and UNK in m.symbols
        assert m.prob("q") == m.prob(UNK)

    def test_lowercases(self):
        m = train(["ABAB"], order=2, min_char_count=1)
        assert "a" in m.symbols and "A" not in m.symbols

    def test_errors(self):
        with pytest.raises(ValueError):
            train([], order=3)
        with pytest.raises(ValueError):
            train(["", ""], order=3)
        with pytest.raises(ValueError):
            train(["a"], order=0)

    def test_tuning_uses_heldout(self):
        corpus = random_corpus(1, 400)
        tuned = train(corpus, order=5, seed=0)
        fixed = train(corpus, order=5, tune=False)
        assert fixed.discounts == (0.75,) * 5
        assert all(0 < d < 1 for d in tuned.discounts)
        held = random_corpus(99, 50)
        assert corpus_bits_per_char(tuned, held) <= corpus_bits_per_char(fixed, held) + 0.05


class TestNormalization:
    def test_random_contexts_sum_to_one(self, model):
        rng = random.Random(0)
        contexts = model.contexts()
        for ctx in rng.sample(contexts, 100):
            hist = ctx.rjust(model.order - 1, BOS)
            total = math.fsum(model._prob(c, hist) for c in model.symbols)
            assert abs(total - 1.0) <= 1e-9

    def test_unseen_context(self, model):
        assert math.fsum(model.distribution("qqq").values()) == pytest.approx(1.0, abs=1e-9)

    def test_all_positive(self, model):
        assert min(model.distribution("zz").values()) > 0


class TestScoring:
    def test_better_than_uniform(self, model):
        held = random_corpus(7, 100)
        assert corpus_bits_per_char(model, held) < math.log2(model.vocab_size)

    def test_additivity(self, model):
        t1, t2 = "tekma se konča.", "maribor je v sloveniji 3:2"
        s1, s2 = bits_per_char(model, t1), bits_per_char(model, t2)
        pooled = corpus_bits_per_char(model, [t1, t2])
        assert pooled == pytest.approx((s1.total_bits + s2.total_bits) / (s1.char_count + s2.char_count), rel=1e-15)
        assert pooled == pytest.approx(
            (s1.bits_per_char * s1.char_count + s2.bits_per_char * s2.char_count) / (s1.char_count + s2.char_count),
            rel=1e-12,
        )

    def test_single_and_equal_length(self, model):
        t = "zmaga je v mariboru."
        assert corpus_bits_per_char(model, [t]) == pytest.approx(bits_per_char(model, t).bits_per_char, rel=1e-15)
        a, b = "tekma", "zmaga"
        mean = (bits_per_char(model, a).bits_per_char + bits_per_char(model, b).bits_per_char) / 2
        assert corpus_bits_per_char(model, [a, b]) == pytest.approx(mean, rel=1e-12)
        assert corpus_bits_per_char(model, [a, b], macro=True) == pytest.approx(mean, rel=1e-12)

    def test_case_insensitive(self, model):
        assert bits_per_char(model, "Tekma SE").bits_per_char == bits_per_char(model, "tekma se").bits_per_char

    def test_empty(self, model):
        with pytest.raises(ValueError):
            bits_per_char(model, "")
        with pytest.raises(ValueError):
            corpus_bits_per_char(model, ["", ""])

    def test_max_chars(self):
        m = train(random_corpus(3), order=3, max_chars=10)
        assert bits_per_char(m, "x" * 50).char_count == 10


class TestSerialization:
    def test_round_trip_bit_identical(self, model, tmp_path):
        p = tmp_path / "m.clm"
        clm.save(model, p)
        back = clm.load(p)
        assert back == model
        rng = random.Random(5)
        alphabet = "abcdefghijklmnopqrstuvwxyzčšž .,:0123456789!Q"
        diffs = []
        for _ in range(1000):
            s = "".join(rng.choices(alphabet, k=rng.randint(1, 40)))
            diffs.append(abs(bits_per_char(model, s).bits_per_char - bits_per_char(back, s).bits_per_char))
        assert max(diffs) == 0.0

    def test_bytes_deterministic(self):
        a = clm.to_bytes(train(random_corpus(2), order=3, seed=4))
        b = clm.to_bytes(train(random_corpus(2), order=3, seed=4))
        assert a == b
        assert a[:8] == b"XLSUMCLM"

    def test_newer_version_rejected(self, model, tmp_path):
        data = bytearray(clm.to_bytes(model))
        data[8:10] = (clm.FORMAT_VERSION + 1).to_bytes(2, "little")
        p = tmp_path / "future.clm"
        p.write_bytes(bytes(data))
        with pytest.raises(ModelVersionError):
            clm.load(p)

    @pytest.mark.parametrize("mutate", ["magic", "crc", "truncate", "short"])
    def test_corrupt(self, model, tmp_path, mutate):
        data = bytearray(clm.to_bytes(model))
        if mutate == "magic":
            data[0:1] = b"Z"
        elif mutate == "crc":
            data[-2] ^= 0xFF
        elif mutate == "truncate":
            data = data[:-5]
        else:
            data = data[:6]
        p = tmp_path / "bad.clm"
        p.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError):
            clm.load(p)
