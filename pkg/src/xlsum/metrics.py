"""ROUGE-N, ROUGE-L and a greedy embedding-matching score (BERTScore analog).

All scores are returned as :class:`PRF` triples. Tokenization is shared by
every metric and by vocabulary building, so counts agree across the package.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from xlsum.embeddings import EmbeddingTable

__all__ = [
    "PRF",
    "EmbedPRF",
    "tokenize",
    "ngrams",
    "rouge_n",
    "lcs_len",
    "rouge_l",
    "embed_score",
    "corpus_rouge",
]

_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f: float

    @classmethod
    def from_pr(cls, precision: float, recall: float, beta: float = 1.0) -> "PRF":
        return cls(precision, recall, f_score(precision, recall, beta))

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f": self.f}


@dataclass(frozen=True)
class EmbedPRF(PRF):
    """PRF plus the fraction of candidate/reference tokens found in the table."""

    cand_coverage: float = 1.0
    ref_coverage: float = 1.0


def f_score(precision: float, recall: float, beta: float = 1.0) -> float:
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if precision + recall == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (recall + b2 * precision)


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on runs of non-alphanumeric characters.

    >>> tokenize("Jean - Claude Juncker")
    ['jean', 'claude', 'juncker']
    >>> tokenize("3:2 (21, -25)")
    ['3', '2', '21', '25']
    """
    return _TOKEN_RE.findall(text.lower())


def _as_tokens(x: str | Sequence[str]) -> Sequence[str]:
    return tokenize(x) if isinstance(x, str) else x


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(cand, ref, n: int = 1, beta: float = 1.0) -> PRF:
    """Clipped n-gram overlap between a candidate and a reference.

    Parameters
    ----------
    cand, ref : str or sequence of str
        Raw strings are passed through :func:`tokenize`.
    n : int
        N-gram order, at least 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand, ref = _as_tokens(cand), _as_tokens(ref)
    c, r = ngrams(cand, n), ngrams(ref, n)
    matches = sum(min(cnt, r[g]) for g, cnt in c.items() if g in r)
    n_c, n_r = sum(c.values()), sum(r.values())
    p = matches / n_c if n_c else 0.0
    rc = matches / n_r if n_r else 0.0
    return PRF.from_pr(p, rc, beta)


def lcs_len(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence, O(|a||b|) time, O(min) space."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, 1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] > prev[j] else prev[j]
        prev = cur
    return prev[-1]


def rouge_l(cand, ref, beta: float = 1.0) -> PRF:
    cand, ref = _as_tokens(cand), _as_tokens(ref)
    if not cand or not ref:
        return PRF(0.0, 0.0, 0.0)
    lcs = lcs_len(cand, ref)
    return PRF.from_pr(lcs / len(cand), lcs / len(ref), beta)


def _unit_rows(table: "EmbeddingTable", tokens: Iterable[str]) -> tuple[np.ndarray, int, int]:
    tokens = list(tokens)
    known = [t for t in tokens if t in table]
    if not known:
        return np.zeros((0, table.dim)), 0, len(tokens)
    m = np.stack([table[t] for t in known])
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("embedding table contains a zero vector")
    return m / norms, len(known), len(tokens)


def embed_score(cand, ref, emb: "EmbeddingTable") -> EmbedPRF:
    """Greedy max-cosine token matching between candidate and reference.

    Recall averages, over in-vocabulary reference tokens, the best cosine to
    any in-vocabulary candidate token; precision is the mirror image. Tokens
    missing from ``emb`` are skipped and reported through the coverage fields.
    Per-token best matches are floored at 0 so every component stays in [0, 1].

    Raises
    ------
    ValueError
        If either side has no token present in ``emb``.
    """
    cand, ref = _as_tokens(cand), _as_tokens(ref)
    c, n_c_known, n_c = _unit_rows(emb, cand)
    r, n_r_known, n_r = _unit_rows(emb, ref)
    if n_c_known == 0 or n_r_known == 0:
        raise ValueError("no in-vocabulary token on the candidate or reference side")
    sim = np.clip(c @ r.T, -1.0, 1.0)
    recall = float(np.mean(np.maximum(sim.max(axis=0), 0.0)))
    precision = float(np.mean(np.maximum(sim.max(axis=1), 0.0)))
    return EmbedPRF(
        precision,
        recall,
        f_score(precision, recall),
        cand_coverage=n_c_known / n_c,
        ref_coverage=n_r_known / n_r,
    )


def corpus_rouge(
    cands: Sequence,
    refs: Sequence,
    kind: str = "rouge1",
    average: str = "macro",
    beta: float = 1.0,
) -> PRF:
    """Corpus-level ROUGE over aligned candidate/reference lists.

    ``average="macro"`` means per-document P, R and F averaged separately.
    ``average="micro"`` pools match counts over the corpus before dividing
    (for ROUGE-L the LCS lengths are pooled).
    """
    if len(cands) != len(refs):
        raise ValueError("candidate and reference lists differ in length")
    if not cands:
        raise ValueError("empty corpus")
    if kind == "rougeL":
        n = None
    elif kind.startswith("rouge") and kind[5:].isdigit():
        n = int(kind[5:])
    else:
        raise ValueError(f"unknown ROUGE kind {kind!r}")
    cands = [_as_tokens(c) for c in cands]
    refs = [_as_tokens(r) for r in refs]

    if average == "macro":
        scores = [rouge_l(c, r, beta) if n is None else rouge_n(c, r, n, beta) for c, r in zip(cands, refs)]
        k = len(scores)
        return PRF(
            sum(s.precision for s in scores) / k,
            sum(s.recall for s in scores) / k,
            sum(s.f for s in scores) / k,
        )
    if average != "micro":
        raise ValueError(f"unknown average {average!r}")
    hits = n_c = n_r = 0
    for c, r in zip(cands, refs):
        if n is None:
            hits += lcs_len(c, r) if c and r else 0
            n_c += len(c)
            n_r += len(r)
        else:
            cg, rg = ngrams(c, n), ngrams(r, n)
            hits += sum(min(v, rg[g]) for g, v in cg.items() if g in rg)
            n_c += sum(cg.values())
            n_r += sum(rg.values())
    return PRF.from_pr(hits / n_c if n_c else 0.0, hits / n_r if n_r else 0.0, beta)
