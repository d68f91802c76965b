"""Supervised cross-lingual embedding alignment by orthogonal Procrustes.

A target-language table is mapped into the source-language space with an
orthogonal matrix ``W`` minimizing ``||XW - Y||_F`` over a seed lexicon, and
the mapping is judged by nearest-neighbour translation retrieval.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from xlsum.embeddings import EmbeddingTable
from xlsum.errors import LexiconFormatError

__all__ = [
    "BilingualLexicon",
    "OrthogonalMap",
    "load_lexicon",
    "save_lexicon",
    "pair_matrices",
    "procrustes",
    "apply_map",
    "precision_at_k",
    "retrieval_report",
    "RetrievalReport",
]

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class BilingualLexicon:
    """Ordered (src_word, tgt_word) pairs, exact duplicates removed."""

    pairs: tuple[tuple[str, str], ...]

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        out = []
        seen = set()
        for src, tgt in pairs:
            if not src or not tgt:
                raise ValueError(f"empty word in lexicon pair {(src, tgt)!r}")
            if (src, tgt) in seen:
                continue
            seen.add((src, tgt))
            out.append((src, tgt))
        object.__setattr__(self, "pairs", tuple(out))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class OrthogonalMap:
    W: np.ndarray
    train_loss: float = 0.0
    n_pairs: int = 0

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"W must be square, got shape {W.shape}")
        resid = orthogonality_residual(W)
        if resid > ORTHO_TOL:
            raise ValueError(f"W is not orthogonal (max |W^T W - I| = {resid:.3g})")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def orthogonality_residual(W: np.ndarray) -> float:
    return float(np.max(np.abs(W.T @ W - np.eye(W.shape[0])))) if W.size else 0.0


def load_lexicon(path: str | os.PathLike) -> BilingualLexicon:
    """Read a UTF-8 TSV lexicon: ``src<TAB>tgt`` per line, ``#`` lines ignored."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise LexiconFormatError(f"expected 2 tab-separated fields, found {len(fields)}", path, lineno)
            src, tgt = fields[0].strip(), fields[1].strip()
            if not src or not tgt:
                raise LexiconFormatError("empty word", path, lineno)
            pairs.append((src, tgt))
    return BilingualLexicon(pairs)


def save_lexicon(lex: BilingualLexicon, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for src, tgt in lex:
            f.write(f"{src}\t{tgt}\n")


def pair_matrices(
    lex: BilingualLexicon, tgt: EmbeddingTable, src: EmbeddingTable
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Stack the training pairs into row-aligned matrices.

    Returns
    -------
    X : ndarray, shape (n, dim)
        Target-language vectors.
    Y : ndarray, shape (n, dim)
        Source-language vectors.
    kept : list of int
        Lexicon indices of the surviving pairs; pairs with an out-of-vocabulary
        word on either side are dropped.
    """
    if tgt.dim != src.dim:
        raise ValueError(f"dimension mismatch: tgt {tgt.dim} vs src {src.dim}")
    kept = [i for i, (s, t) in enumerate(lex.pairs) if s in src and t in tgt]
    dropped = len(lex) - len(kept)
    if dropped:
        logger.info("dropped %d of %d lexicon pairs with out-of-vocabulary words", dropped, len(lex))
    if not kept:
        raise ValueError("no lexicon pair has both words in the embedding tables")
    X = np.stack([tgt[lex.pairs[i][1]] for i in kept])
    Y = np.stack([src[lex.pairs[i][0]] for i in kept])
    return X, Y, kept


def procrustes(X, Y) -> OrthogonalMap:
    """Orthogonal ``W`` minimizing ``||XW - Y||_F``.

    With ``U S V^T`` the SVD of ``X^T Y``, the minimizer is ``W = U V^T``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or X.shape != Y.shape:
        raise ValueError(f"X and Y must be 2-D of equal shape, got {X.shape} and {Y.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one pair")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("non-finite input")
    try:
        U, _, Vt = np.linalg.svd(X.T @ Y)
    except np.linalg.LinAlgError as e:
        raise RuntimeError(f"SVD failed: {e}") from e
    W = U @ Vt
    loss = float(np.linalg.norm(X @ W - Y))
    return OrthogonalMap(W, train_loss=loss, n_pairs=X.shape[0])


def apply_map(m: OrthogonalMap, table: EmbeddingTable) -> EmbeddingTable:
    if table.dim != m.dim:
        raise ValueError(f"dimension mismatch: table {table.dim} vs map {m.dim}")
    return EmbeddingTable(table.tokens, table.vectors @ m.W, dim=table.dim)


@dataclass
class RetrievalReport:
    precision: dict[int, float]
    n_evaluated: int
    n_oov: int
    hits: dict[int, int] = field(default_factory=dict)


def _normalized(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero vector in retrieval table")
    return m / norms


def retrieval_report(
    mapped: EmbeddingTable,
    src: EmbeddingTable,
    test: BilingualLexicon,
    ks: Sequence[int] = (1, 5, 10),
    batch_size: int = 512,
) -> RetrievalReport:
    """Nearest-neighbour (cosine) translation retrieval at several cutoffs.

    A test pair ``(s, t)`` counts as a hit at ``k`` when ``s`` is among the
    ``k`` source tokens most similar to ``mapped[t]``. Ties are resolved by
    source-table order. Pairs with an OOV word are excluded from the
    denominator and counted in ``n_oov``.
    """
    if mapped.dim != src.dim:
        raise ValueError(f"dimension mismatch: mapped {mapped.dim} vs src {src.dim}")
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("k must be >= 1")
    pairs = [(s, t) for s, t in test if s in src and t in mapped]
    n_oov = len(test) - len(pairs)
    if not pairs:
        raise ValueError("no evaluable test pairs")
    S = _normalized(src.vectors)
    kmax = min(ks[-1], len(src))
    hits = {k: 0 for k in ks}
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        Q = _normalized(np.stack([mapped[t] for _, t in chunk]))
        sims = Q @ S.T
        order = np.argsort(-sims, axis=1, kind="stable")[:, :kmax]
        gold = np.array([src.index(s) for s, _ in chunk])
        pos = np.full(len(chunk), np.inf)
        found = order == gold[:, None]
        any_found = found.any(axis=1)
        pos[any_found] = found[any_found].argmax(axis=1)
        for k in ks:
            hits[k] += int(np.sum(pos < k))
    n = len(pairs)
    return RetrievalReport({k: hits[k] / n for k in ks}, n, n_oov, hits)


def precision_at_k(mapped: EmbeddingTable, src: EmbeddingTable, test: BilingualLexicon, k: int = 1) -> float:
    return retrieval_report(mapped, src, test, ks=(k,)).precision[k]
