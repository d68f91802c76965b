"""Deterministic synthetic data: rotated embedding spaces, hypothesis beams
with a known correct answer, and a small end-to-end pipeline fixture."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from xlsum.alignment import BilingualLexicon, save_lexicon
from xlsum.corpus import SummaryPair, write_pairs
from xlsum.embeddings import EmbeddingTable, save_vec
from xlsum.metrics import tokenize
from xlsum.rerank import Hypothesis, HypothesisSet, dedupe_repeats, write_hypotheses

__all__ = [
    "random_orthogonal",
    "pseudo_words",
    "rotation_fixture",
    "rerank_fixture",
    "write_demo_fixture",
]

_ONSETS = ["b", "c", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "pl"]
_VOWELS = ["a", "e", "i", "o", "u"]


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian, sign-corrected)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def pseudo_words(n: int, rng: np.random.Generator, prefix: str = "") -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < n:
        k = int(rng.integers(2, 4))
        w = prefix + "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def rotation_fixture(n_words: int = 200, dim: int = 10, seed: int = 0, noise: float = 0.0):
    """Source space and a target space that is an exact (or noisy) rotation of it.

    Returns ``(tgt, src, lexicon, R)`` with ``src ≈ tgt @ R`` row for row and
    the lexicon pairing ``src`` word ``i`` with ``tgt`` word ``i``.
    """
    rng = np.random.default_rng(seed)
    R = random_orthogonal(dim, rng)
    X = rng.standard_normal((n_words, dim))
    Y = X @ R
    if noise:
        X = X + noise * rng.standard_normal(X.shape)
    src_words = pseudo_words(n_words, rng, prefix="en")
    tgt_words = pseudo_words(n_words, rng, prefix="sl")
    src = EmbeddingTable(src_words, Y)
    tgt = EmbeddingTable(tgt_words, X)
    lex = BilingualLexicon(zip(src_words, tgt_words))
    return tgt, src, lex, R


def _has_repeat(tokens, min_n=3, max_n=10) -> bool:
    return dedupe_repeats(" ".join(tokens), min_n, max_n).split() != list(tokens)


def _sentence(rng, vocab, lo=8, hi=15) -> list[str]:
    while True:
        toks = [vocab[i] for i in rng.integers(len(vocab), size=int(rng.integers(lo, hi)))]
        if not _has_repeat(toks):
            return toks


def _render(tokens) -> str:
    return tokens[0].capitalize() + " " + " ".join(tokens[1:]) + "."


def _corrupt(tokens, rng, vocab) -> list[str]:
    toks = list(tokens)
    for _ in range(int(rng.integers(1, 4))):
        op = int(rng.integers(5))
        i = int(rng.integers(len(toks)))
        if op == 0 and len(toks) > 3:
            del toks[i]
        elif op == 1 and i + 1 < len(toks):
            toks[i], toks[i + 1] = toks[i + 1], toks[i]
        elif op == 2:
            toks[i] = vocab[int(rng.integers(len(vocab)))]
        elif op == 3 and len(toks) > 4:
            toks = toks[: max(3, len(toks) - int(rng.integers(1, 4)))]
        elif i + 3 <= len(toks):
            # decoder-style stutter, removed again by dedupe_repeats
            toks = toks[: i + 3] + toks[i : i + 3] + toks[i + 3 :]
    return toks


def rerank_fixture(
    n_docs: int = 100,
    beam_width: int = 64,
    seed: int = 0,
    n_sentences: int = 6,
    n_extracted: tuple[int, int] = (2, 4),
    vocab_size: int = 400,
    dim: int = 16,
):
    """Documents whose every beam holds the extracted sentence verbatim at a
    random position among ``beam_width - 1`` corrupted variants.

    The gold summary of a document is its extracted sentences joined in
    order, so selecting the verbatim hypothesis everywhere reproduces it.
    Internal losses are random and carry no information.

    Returns ``(hsets, references, emb, vocab)`` where ``references`` maps
    doc id to a :class:`SummaryPair`.
    """
    rng = np.random.default_rng(seed)
    vocab = pseudo_words(vocab_size, rng, prefix="")
    emb = EmbeddingTable(vocab, rng.standard_normal((vocab_size, dim)))
    hsets, refs = [], {}
    for d in range(n_docs):
        doc_id = f"doc{d:05d}"
        sents = []
        while len(sents) < n_sentences:
            s = _render(_sentence(rng, vocab))
            if s not in sents:
                sents.append(s)
        k = int(rng.integers(n_extracted[0], n_extracted[1] + 1))
        extracted = sorted(int(i) for i in rng.choice(n_sentences, size=min(k, n_sentences), replace=False))
        beams = []
        for i in extracted:
            ref_toks = tokenize(sents[i])
            variants = []
            while len(variants) < beam_width - 1:
                v = _corrupt(ref_toks, rng, vocab)
                if tokenize(dedupe_repeats(" ".join(v))) != ref_toks:
                    variants.append(_render(v))
            pos = int(rng.integers(beam_width))
            texts = variants[:pos] + [sents[i]] + variants[pos:]
            losses = rng.uniform(0.5, 3.0, size=beam_width)
            beams.append(tuple(Hypothesis(t, float(x)) for t, x in zip(texts, losses)))
        hsets.append(HypothesisSet(doc_id, tuple(sents), tuple(extracted), tuple(beams)).validate(beam_width))
        body = " ".join(s for j, s in enumerate(sents) if j not in extracted) or sents[0]
        refs[doc_id] = SummaryPair(doc_id, body, " ".join(sents[i] for i in extracted))
    return hsets, refs, emb, vocab


def write_demo_fixture(out_dir: str | os.PathLike, seed: int = 0, n_docs: int = 20, beam_width: int = 64) -> Path:
    """Write a complete pipeline input set into ``out_dir``.

    Files: ``src.vec`` and ``tgt.vec`` (target space = rotated source space
    plus noise), ``lexicon_train.tsv`` / ``lexicon_test.tsv``,
    ``hypotheses.jsonl``, ``references.jsonl``, ``lm.txt`` and
    ``config.json``. Returns the config path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed + 1)
    hsets, refs, _, vocab = rerank_fixture(n_docs, beam_width, seed, vocab_size=300, dim=12)
    dim = 12
    R = random_orthogonal(dim, rng)
    X = rng.standard_normal((len(vocab), dim))
    Y = X @ R + 0.05 * rng.standard_normal((len(vocab), dim))
    src_words = [f"en{w}" for w in vocab]
    save_vec(EmbeddingTable(vocab, X), out / "tgt.vec")
    save_vec(EmbeddingTable(src_words, Y), out / "src.vec")
    order = rng.permutation(len(vocab))
    pairs = [(src_words[i], vocab[i]) for i in order]
    save_lexicon(BilingualLexicon(pairs[:200]), out / "lexicon_train.tsv")
    save_lexicon(BilingualLexicon(pairs[200:]), out / "lexicon_test.tsv")
    write_hypotheses(hsets, out / "hypotheses.jsonl")
    write_pairs([refs[h.doc_id] for h in hsets], out / "references.jsonl")
    with open(out / "lm.txt", "w", encoding="utf-8", newline="\n") as f:
        for _ in range(600):
            f.write(_render(_sentence(rng, vocab)) + "\n")
    config = {
        "hypotheses": "hypotheses.jsonl",
        "references": "references.jsonl",
        "src_vec": "src.vec",
        "tgt_vec": "tgt.vec",
        "lexicon": "lexicon_train.tsv",
        "test_lexicon": "lexicon_test.tsv",
        "lm_corpus": "lm.txt",
        "lm_order": 4,
        "strategy": "filter:rouge_l:32,best:bert_score",
        "seed": seed,
        "beam_width": beam_width,
        "model_name": "filter rouge_l, best bert_score (synthetic)",
    }
    path = out / "config.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path
