"""Word-embedding tables: ``.vec`` I/O, cosine similarity, vocabulary building."""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from xlsum.errors import VecFormatError
from xlsum.metrics import tokenize

__all__ = [
    "EmbeddingTable",
    "Vocabulary",
    "load_vec",
    "save_vec",
    "cosine",
    "build_vocab",
    "restrict",
    "unit_norm",
]


class EmbeddingTable:
    """Immutable ordered mapping from token to a float64 vector.

    Parameters
    ----------
    tokens : sequence of str
        Unique, non-empty tokens. Order is preserved.
    vectors : array_like, shape (len(tokens), dim)
    """

    def __init__(self, tokens: Sequence[str], vectors, dim: int | None = None):
        tokens = tuple(tokens)
        vecs = np.array(vectors, dtype=np.float64)
        if vecs.size == 0:
            if dim is None:
                dim = vecs.shape[1] if vecs.ndim == 2 else 0
            vecs = vecs.reshape(0, dim)
        if vecs.ndim != 2 or vecs.shape[0] != len(tokens):
            raise ValueError(f"expected {len(tokens)} vectors, got array of shape {vecs.shape}")
        if dim is not None and vecs.shape[1] != dim:
            raise ValueError(f"vectors have dimension {vecs.shape[1]}, expected {dim}")
        if vecs.shape[1] < 1:
            raise ValueError("dimension must be positive")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("non-finite vector component")
        index = {}
        for i, t in enumerate(tokens):
            if not t:
                raise ValueError("empty token")
            if t in index:
                raise ValueError(f"duplicate token {t!r}")
            index[t] = i
        vecs.setflags(write=False)
        self._tokens = tokens
        self._vectors = vecs
        self._index = index

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def vectors(self) -> np.ndarray:
        """Read-only ``(n, dim)`` matrix, rows in token order."""
        return self._vectors

    def index(self, token: str) -> int:
        return self._index[token]

    def __getitem__(self, token: str) -> np.ndarray:
        return self._vectors[self._index[token]]

    def get(self, token: str, default=None):
        i = self._index.get(token)
        return default if i is None else self._vectors[i]

    def __contains__(self, token) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tokens)

    def items(self):
        return zip(self._tokens, self._vectors)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self._tokens == other._tokens
            and self._vectors.shape == other._vectors.shape
            and bool(np.array_equal(self._vectors, other._vectors))
        )

    def __repr__(self) -> str:
        return f"EmbeddingTable(n={len(self)}, dim={self.dim})"


@dataclass(frozen=True)
class Vocabulary:
    """(token, count) pairs sorted by descending count, ties lexicographic."""

    entries: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen = set()
        prev = None
        for tok, cnt in self.entries:
            if tok in seen:
                raise ValueError(f"duplicate token {tok!r}")
            if cnt < 1:
                raise ValueError(f"count for {tok!r} must be >= 1")
            if prev is not None and cnt > prev:
                raise ValueError("counts must be non-increasing")
            seen.add(tok)
            prev = cnt

    @property
    def tokens(self) -> list[str]:
        return [t for t, _ in self.entries]

    def __contains__(self, token) -> bool:
        return any(t == token for t, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_vec(path: str | os.PathLike) -> EmbeddingTable:
    """Read a fastText-style ``.vec`` text file.

    The first line holds ``<count> <dim>``; each following line is a token
    and ``dim`` space-separated decimals. Trailing spaces at line end (as
    written by fastText) are tolerated.

    Raises
    ------
    VecFormatError
        Malformed header, wrong component count, non-numeric component,
        non-finite value, empty or duplicate token, or a row count that
        disagrees with the header.
    """
    path = os.fspath(path)
    with open(path, encoding="utf-8", newline="") as f:
        header = f.readline()
        parts = header.rstrip("\r\n").rstrip(" ").split(" ")
        try:
            if len(parts) != 2:
                raise ValueError
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise VecFormatError(f"malformed header {header.rstrip()!r}", path, 1) from None
        if count < 0 or dim < 1:
            raise VecFormatError(f"invalid header values count={count} dim={dim}", path, 1)

        tokens: list[str] = []
        seen: set[str] = set()
        vecs = np.empty((count, dim), dtype=np.float64)
        lineno = 1
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n").rstrip(" ")
            if not line and lineno > count + 1:
                continue
            if len(tokens) == count:
                raise VecFormatError(f"more rows than the declared {count}", path, lineno)
            fields = line.split(" ")
            tok = fields[0]
            if not tok:
                raise VecFormatError("empty token", path, lineno)
            if len(fields) - 1 != dim:
                raise VecFormatError(f"expected {dim} components, found {len(fields) - 1}", path, lineno)
            if tok in seen:
                raise VecFormatError(f"duplicate token {tok!r}", path, lineno)
            try:
                row = [float(x) for x in fields[1:]]
            except ValueError:
                raise VecFormatError("non-numeric component", path, lineno) from None
            if not all(math.isfinite(x) for x in row):
                raise VecFormatError("non-finite component", path, lineno)
            vecs[len(tokens)] = row
            tokens.append(tok)
            seen.add(tok)
    if len(tokens) != count:
        raise VecFormatError(f"header declares {count} rows, found {len(tokens)}", path)
    return EmbeddingTable(tokens, vecs, dim=dim)


def save_vec(table: EmbeddingTable, path: str | os.PathLike, precision: int | None = None) -> None:
    """Write ``table`` in ``.vec`` format.

    With ``precision=None`` every component is written with ``repr`` so the
    file reloads to identical float64 values.
    """
    fmt = repr if precision is None else (lambda x: f"{x:.{precision}g}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(table)} {table.dim}\n")
        for tok, vec in table.items():
            f.write(tok + " " + " ".join(fmt(float(x)) for x in vec) + "\n")


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine of a zero vector is undefined")
    # Normalizing first keeps cosine(a*u, v) == cosine(u, v) for a > 0.
    c = float(np.dot(u / nu, v / nv))
    return min(1.0, max(-1.0, c))


def build_vocab(texts: Iterable[str], k: int) -> Vocabulary:
    """Top-``k`` tokens of ``texts`` under :func:`xlsum.metrics.tokenize`."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts: Counter = Counter()
    for text in texts:
        counts.update(tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tuple(ranked[:k]))


def restrict(table: EmbeddingTable, vocab: Vocabulary | Iterable[str]) -> EmbeddingTable:
    """Keep only tokens in both inputs, in vocabulary order."""
    words = vocab.tokens if isinstance(vocab, Vocabulary) else list(vocab)
    keep = [w for w in words if w in table]
    rows = [table.index(w) for w in keep]
    return EmbeddingTable(keep, table.vectors[rows], dim=table.dim)


def unit_norm(table: EmbeddingTable) -> EmbeddingTable:
    """Rescale every vector to unit length (zero vectors are left as is)."""
    norms = np.linalg.norm(table.vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return EmbeddingTable(table.tokens, table.vectors / norms, dim=table.dim)
