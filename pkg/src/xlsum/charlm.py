"""Character n-gram language model scored in bits per character.

Probabilities are recursively interpolated with absolute discounting down to
a uniform distribution over the model's symbols::

    p_{-1}(c)    = 1 / |A|
    p_m(c | h_m) = (max(n(h_m, c) - D_m, 0) + D_m * T(h_m) * p_{m-1}(c | h_{m-1})) / N(h_m)

where ``h_m`` is the last ``m`` characters of the history, ``n`` are counts,
``N(h) = sum_c n(h, c)`` and ``T(h)`` is the number of distinct successors.
Unseen contexts (``N(h) = 0``) pass the lower-order estimate through
unchanged. Each sentence is scored independently, with its history padded by
``order - 1`` BOS symbols.

Model file layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"XLSUMCLM"
    8       2     format version (uint16, currently 1)
    10      4     payload length in bytes (uint32)
    14      4     CRC-32 of the payload (uint32)
    18      ...   payload: UTF-8 JSON, keys sorted, no whitespace

The payload holds ``order``, ``symbols`` (outcome alphabet, sorted),
``bos``, ``unk``, ``discounts`` (one per context length, as ``float.hex``
strings so they reload bit-exactly), ``max_chars`` and ``counts``
(``{context: {char: count}}``).
"""

from __future__ import annotations

import json
import math
import os
import struct
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from xlsum.corpus import SentenceRecord, lm_normalize, seeded_shuffle
from xlsum.errors import ModelFormatError, ModelVersionError

__all__ = [
    "BOS",
    "UNK",
    "CharLM",
    "PerplexityScore",
    "train",
    "bits_per_char",
    "corpus_bits_per_char",
    "save",
    "load",
    "FORMAT_VERSION",
]

BOS = "\ue000"
UNK = "\ue001"
MAGIC = b"XLSUMCLM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHII")

DEFAULT_DISCOUNT = 0.75
DISCOUNT_GRID = (0.75, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)


@dataclass(frozen=True)
class PerplexityScore:
    bits_per_char: float
    char_count: int
    total_bits: float


class CharLM:
    """Immutable character n-gram model; see the module docstring for the estimator."""

    def __init__(
        self,
        order: int,
        symbols: Iterable[str],
        counts: dict[str, dict[str, int]] | None = None,
        discounts: Sequence[float] | None = None,
        max_chars: int | None = None,
    ):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        symbols = tuple(sorted(set(symbols)))
        if not symbols:
            raise ValueError("empty alphabet")
        if BOS in symbols:
            raise ValueError("BOS cannot be an outcome symbol")
        if discounts is None:
            discounts = [DEFAULT_DISCOUNT] * order
        discounts = tuple(float(d) for d in discounts)
        if len(discounts) != order or not all(0 < d < 1 for d in discounts):
            raise ValueError("need one discount in (0, 1) per context length")
        counts = counts or {}
        sym_set = set(symbols)
        stats = {}
        for ctx, succ in counts.items():
            if len(ctx) >= order:
                raise ValueError(f"context {ctx!r} longer than order - 1")
            for c, n in succ.items():
                if c not in sym_set:
                    raise ValueError(f"count for unknown symbol {c!r}")
                if n < 1:
                    raise ValueError("counts must be positive")
            if succ:
                stats[ctx] = (sum(succ.values()), len(succ))
        self.order = order
        self.symbols = symbols
        self.discounts = discounts
        self.max_chars = max_chars
        self._counts = {ctx: dict(succ) for ctx, succ in counts.items() if succ}
        self._stats = stats
        self._sym_set = sym_set
        self._log2_size = math.log2(len(symbols))

    @classmethod
    def uniform(cls, symbols: Iterable[str], order: int = 1) -> "CharLM":
        """Model with no counts: every symbol has probability ``1 / |A|``."""
        return cls(order, symbols)

    @property
    def vocab_size(self) -> int:
        return len(self.symbols)

    @property
    def counts(self) -> dict[str, dict[str, int]]:
        return {ctx: dict(s) for ctx, s in self._counts.items()}

    def contexts(self) -> list[str]:
        return sorted(self._counts)

    def map_char(self, ch: str) -> str:
        if ch in self._sym_set:
            return ch
        if UNK in self._sym_set:
            return UNK
        raise ValueError(f"character {ch!r} not in the model alphabet and the model has no UNK symbol")

    def prob(self, ch: str, history: str = "") -> float:
        """``p(ch | history)``; ``history`` is left-padded with BOS as needed."""
        ch = self.map_char(ch)
        k = self.order - 1
        hist = (BOS * k + "".join(self.map_char(c) for c in history))[len(history) :] if k else ""
        return self._prob(ch, hist)

    def _prob(self, ch: str, hist: str) -> float:
        p = 1.0 / len(self.symbols)
        for m in range(self.order):
            ctx = hist[len(hist) - m :] if m else ""
            st = self._stats.get(ctx)
            if st is None:
                continue
            total, types = st
            d = self.discounts[m]
            n = self._counts[ctx].get(ch, 0)
            p = (max(n - d, 0.0) + d * types * p) / total
        return p

    def distribution(self, history: str = "") -> dict[str, float]:
        return {c: self.prob(c, history) for c in self.symbols}

    def _bits(self, ch: str, hist: str) -> float:
        if not self._stats:
            return self._log2_size
        return -math.log2(self._prob(ch, hist))

    def score(self, text: str) -> PerplexityScore:
        return bits_per_char(self, text)

    def __eq__(self, other):
        if not isinstance(other, CharLM):
            return NotImplemented
        return (
            self.order == other.order
            and self.symbols == other.symbols
            and self.discounts == other.discounts
            and self.max_chars == other.max_chars
            and self._counts == other._counts
        )

    def __repr__(self):
        return f"CharLM(order={self.order}, symbols={len(self.symbols)}, contexts={len(self._counts)})"


def _prepare(model: CharLM, text: str) -> str:
    s = lm_normalize(text).text
    if model.max_chars is not None:
        s = s[: model.max_chars]
    return s


def bits_per_char(model: CharLM, text: str | SentenceRecord) -> PerplexityScore:
    """Average ``-log2 p(c_i | context)`` over the characters of ``text``.

    The text is lower-cased with :func:`xlsum.corpus.lm_normalize` first;
    characters outside the alphabet are scored as UNK.
    """
    if isinstance(text, SentenceRecord):
        text = text.text
    s = _prepare(model, text)
    if not s:
        raise ValueError("cannot score empty text")
    chars = [model.map_char(c) for c in s]
    pad = BOS * (model.order - 1)
    seq = pad + "".join(chars)
    k = model.order - 1
    bits = [model._bits(c, seq[i : i + k]) for i, c in enumerate(chars)]
    # Offsetting by the first term keeps the mean exact when all terms agree.
    x0 = bits[0]
    mean = x0 + math.fsum(b - x0 for b in bits) / len(bits)
    return PerplexityScore(mean, len(chars), math.fsum(bits))


def corpus_bits_per_char(model: CharLM, texts: Iterable[str], macro: bool = False) -> float:
    """Micro-average (total bits over total characters) of per-text scores.

    Empty texts are skipped. ``macro=True`` averages per-text scores instead.
    """
    scores = [bits_per_char(model, t) for t in texts if _prepare(model, t if isinstance(t, str) else t.text)]
    if not scores:
        raise ValueError("no non-empty text to score")
    if macro:
        return math.fsum(s.bits_per_char for s in scores) / len(scores)
    return math.fsum(s.total_bits for s in scores) / sum(s.char_count for s in scores)


def _count(seqs: Sequence[str], order: int) -> dict[str, dict[str, int]]:
    counts: dict[str, Counter] = defaultdict(Counter)
    pad = BOS * (order - 1)
    for s in seqs:
        padded = pad + s
        for i, c in enumerate(s):
            end = i + order - 1
            for m in range(order):
                counts[padded[end - m : end]][c] += 1
    return {ctx: dict(c) for ctx, c in counts.items()}


def _heldout_arrays(counts, seqs, order):
    """Per held-out character and context length: successor count, context
    total and context type count (total 0 for unseen contexts)."""
    pad = BOS * (order - 1)
    stats = {ctx: (sum(s.values()), len(s)) for ctx, s in counts.items()}
    rows_n, rows_tot, rows_typ = [], [], []
    for s in seqs:
        padded = pad + s
        for i, c in enumerate(s):
            end = i + order - 1
            rn, rt, ry = [], [], []
            for m in range(order):
                ctx = padded[end - m : end]
                tot, typ = stats.get(ctx, (0, 0))
                rn.append(counts.get(ctx, {}).get(c, 0))
                rt.append(tot)
                ry.append(typ)
            rows_n.append(rn)
            rows_tot.append(rt)
            rows_typ.append(ry)
    return (np.array(rows_n, dtype=np.float64), np.array(rows_tot, dtype=np.float64), np.array(rows_typ, dtype=np.float64))


def _heldout_bits(arrays, discounts, vocab_size) -> float:
    n, tot, typ = arrays
    p = np.full(n.shape[0], 1.0 / vocab_size)
    for m, d in enumerate(discounts):
        seen = tot[:, m] > 0
        safe = np.where(seen, tot[:, m], 1.0)
        q = (np.maximum(n[:, m] - d, 0.0) + d * typ[:, m] * p) / safe
        p = np.where(seen, q, p)
    return float(-np.mean(np.log2(p)))


def train(
    sentences: Iterable[str | SentenceRecord],
    order: int = 6,
    min_char_count: int = 2,
    heldout_fraction: float = 0.05,
    tune: bool = True,
    seed: int = 0,
    max_chars: int | None = None,
) -> CharLM:
    """Fit a :class:`CharLM` on sentences.

    Sentences are normalized with :func:`lm_normalize`; characters seen fewer
    than ``min_char_count`` times become UNK. When ``tune`` is set and the
    held-out slice (``heldout_fraction`` of a seeded shuffle) is non-empty,
    the per-order discounts are chosen from ``DISCOUNT_GRID`` by coordinate
    descent on held-out bits/char with counts from the remaining sentences.
    The final counts then use the whole corpus.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    seqs = []
    for s in sentences:
        text = s.text if isinstance(s, SentenceRecord) else s
        text = lm_normalize(text).text
        if max_chars is not None:
            text = text[:max_chars]
        if text:
            seqs.append(text)
    if not seqs:
        raise ValueError("empty training corpus")

    freq = Counter(c for s in seqs for c in s)
    keep = {c for c, n in freq.items() if n >= min_char_count and c not in (BOS, UNK)}
    seqs = ["".join(c if c in keep else UNK for c in s) for s in seqs]
    symbols = keep | {UNK}

    discounts = [DEFAULT_DISCOUNT] * order
    n_held = int(len(seqs) * heldout_fraction)
    if tune and n_held >= 1 and len(seqs) - n_held >= 1:
        idx = seeded_shuffle(range(len(seqs)), seed)
        held = [seqs[i] for i in sorted(idx[:n_held])]
        rest = [seqs[i] for i in sorted(idx[n_held:])]
        arrays = _heldout_arrays(_count(rest, order), held, order)
        best = _heldout_bits(arrays, discounts, len(symbols))
        for m in range(order):
            for d in DISCOUNT_GRID:
                trial = list(discounts)
                trial[m] = d
                h = _heldout_bits(arrays, trial, len(symbols))
                if h < best:
                    best, discounts = h, trial

    return CharLM(order, symbols, _count(seqs, order), discounts, max_chars=max_chars)


def to_bytes(model: CharLM) -> bytes:
    payload = {
        "order": model.order,
        "symbols": list(model.symbols),
        "bos": BOS,
        "unk": UNK,
        "discounts": [d.hex() for d in model.discounts],
        "max_chars": model.max_chars,
        "counts": {ctx: dict(sorted(s.items())) for ctx, s in sorted(model._counts.items())},
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(body), zlib.crc32(body)) + body


def from_bytes(data: bytes) -> CharLM:
    if len(data) < _HEADER.size:
        raise ModelFormatError("truncated model header")
    magic, version, length, crc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a character LM file (bad magic)")
    if version > FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version} is newer than supported version {FORMAT_VERSION}")
    if version < 1:
        raise ModelVersionError(f"unsupported model format version {version}")
    body = data[_HEADER.size :]
    if len(body) != length:
        raise ModelFormatError(f"payload length {len(body)} does not match header {length}")
    if zlib.crc32(body) != crc:
        raise ModelFormatError("payload checksum mismatch")
    try:
        p = json.loads(body.decode("utf-8"))
        if p["bos"] != BOS or p["unk"] != UNK:
            raise ModelFormatError("reserved symbols differ from this build")
        return CharLM(
            p["order"],
            p["symbols"],
            p["counts"],
            [float.fromhex(d) for d in p["discounts"]],
            max_chars=p["max_chars"],
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt payload: {e}") from None


def save(model: CharLM, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(to_bytes(model))


def load(path: str | os.PathLike) -> CharLM:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return from_bytes(data)
    except ModelFormatError as e:
        if e.path is None:
            raise type(e)(str(e), path) from None
        raise
