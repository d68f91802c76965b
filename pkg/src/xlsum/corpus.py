"""Summarization and language-model dataset construction.

Covers first-paragraph extraction from sentence-segmented news, the length
filter, seeded train/val/test splits, nested fine-tuning portions and the
lower-casing normalization used for the character language model.

Shuffles use Fisher-Yates driven by SplitMix64, so a given seed produces the
same permutation on every platform and in every implementation that follows
the same recipe (see :class:`SplitMix64`).
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from xlsum.errors import FormatError

__all__ = [
    "SummaryPair",
    "SplitSpec",
    "SentenceRecord",
    "Stats",
    "SplitMix64",
    "seeded_shuffle",
    "sentence_split",
    "lead_count",
    "split_first_paragraph",
    "length_filter",
    "make_splits",
    "portion_size",
    "sample_portion",
    "lm_normalize",
    "corpus_stats",
    "read_pairs",
    "write_pairs",
    "read_jsonl",
    "write_jsonl",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SummaryPair:
    id: str
    body: str
    summary: str

    def __post_init__(self):
        if not self.body or not self.summary:
            raise ValueError(f"pair {self.id!r}: body and summary must be non-empty")

    def to_json(self) -> dict:
        return {"id": self.id, "text": self.body, "summary": self.summary}

    @classmethod
    def from_json(cls, obj: dict) -> "SummaryPair":
        return cls(str(obj["id"]), obj["text"], obj["summary"])


@dataclass(frozen=True)
class SplitSpec:
    test_size: int
    val_size: int
    seed: int = 0

    def __post_init__(self):
        if self.test_size < 0 or self.val_size < 0:
            raise ValueError("split sizes must be non-negative")


@dataclass(frozen=True)
class SentenceRecord:
    text: str


@dataclass(frozen=True)
class Stats:
    count: int
    avg_sentences: float
    avg_chars: float
    avg_sentence_chars: float


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    ``state += 0x9E3779B97F4A7C15``; output ``z`` is mixed as
    ``z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9``,
    ``z = (z ^ z >> 27) * 0x94D049BB133111EB``, ``z ^ z >> 31`` (mod 2**64).
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection of the biased tail."""
        if bound < 1:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound


def seeded_shuffle(items: Sequence, seed: int) -> list:
    """Fisher-Yates shuffle: for i = n-1 .. 1 swap i with ``below(i + 1)``."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


_BOUNDARY = re.compile(r"[.!?]+(?=\s+[^\W_])")


def _guarded(text: str, dot: int) -> bool:
    # Token immediately before the terminator, e.g. "dr" in "dr. Novak".
    m = re.search(r"(\w+)$", text[:dot])
    if m is None:
        return False
    word = m.group(1)
    if not word.isalpha():
        return False
    return len(word) == 2 or (len(word) == 1 and word.isupper())


def sentence_split(text: str) -> list[str]:
    """Split ``text`` after ``.``, ``!`` or ``?`` followed by whitespace and an
    uppercase letter or digit.

    A period after a two-letter word ("dr.", "mr.") or a single capital
    initial ("J.") is treated as an abbreviation and does not split.

    >>> sentence_split("A b. C d.")
    ['A b.', 'C d.']
    >>> sentence_split("dr. Novak je prišel.")
    ['dr. Novak je prišel.']
    """
    out = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        nxt = text[m.end():].lstrip()[:1]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if text[m.start()] == "." and m.end() - m.start() == 1 and _guarded(text, m.start()):
            continue
        piece = text[start : m.end()].strip()
        if piece:
            out.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def lead_count(lengths: Sequence[int], budget_chars: int = 300, max_lead_sentences: int = 3) -> int:
    """Number of leading sentences taken as the summary.

    The next sentence is included while the running character total is below
    ``budget_chars`` and fewer than ``max_lead_sentences`` are taken; at least
    one sentence is taken and the last sentence always stays in the body.
    """
    if len(lengths) < 2:
        raise ValueError("need at least 2 sentences to split into summary and body")
    if budget_chars < 1 or max_lead_sentences < 1:
        raise ValueError("budget_chars and max_lead_sentences must be positive")
    n, total = 1, lengths[0]
    while n < len(lengths) - 1 and n < max_lead_sentences and total < budget_chars:
        total += lengths[n]
        n += 1
    return n


def split_first_paragraph(
    sentences: Sequence[str], budget_chars: int = 300, max_lead_sentences: int = 3
) -> tuple[str, str]:
    """Heuristic lead paragraph: returns ``(summary, body)`` joined by spaces."""
    n = lead_count([len(s) for s in sentences], budget_chars, max_lead_sentences)
    return " ".join(sentences[:n]), " ".join(sentences[n:])


def _measure(pair: SummaryPair, measure: str) -> int:
    if measure == "total":
        return len(pair.body) + len(pair.summary)
    if measure == "body":
        return len(pair.body)
    raise ValueError(f"unknown measure {measure!r}")


def length_filter(
    pairs: Iterable[SummaryPair], min_chars: int = 1000, max_chars: int = 3000, measure: str = "total"
) -> list[SummaryPair]:
    """Keep pairs whose length lies in ``[min_chars, max_chars]``.

    ``measure="total"`` counts summary plus body characters, ``"body"`` only
    the body.
    """
    if min_chars > max_chars:
        raise ValueError("min_chars must not exceed max_chars")
    return [p for p in pairs if min_chars <= _measure(p, measure) <= max_chars]


def make_splits(pairs: Sequence, spec: SplitSpec) -> tuple[list, list, list]:
    """Seeded shuffle, then test = first ``test_size``, val = next ``val_size``,
    train = the rest. Returns ``(train, val, test)``."""
    if spec.test_size + spec.val_size > len(pairs):
        raise ValueError(
            f"test_size + val_size = {spec.test_size + spec.val_size} exceeds dataset size {len(pairs)}"
        )
    shuffled = seeded_shuffle(pairs, spec.seed)
    test = shuffled[: spec.test_size]
    val = shuffled[spec.test_size : spec.test_size + spec.val_size]
    train = shuffled[spec.test_size + spec.val_size :]
    return train, val, test


def portion_size(n: int, pct, rounding: str = "nearest") -> int:
    """Items in a ``pct`` percent portion of ``n``.

    ``"nearest"`` rounds halves up and reproduces all of 1,176 / 11,756 /
    29,391 / 58,782 for 1/10/25/50 % of 117,563; ``"ceil"`` and ``"floor"``
    are available for other conventions.
    """
    frac = Fraction(str(pct)) if isinstance(pct, float) else Fraction(pct)
    if not 0 < frac <= 100:
        raise ValueError(f"pct must be in (0, 100], got {pct}")
    exact = frac * n / 100
    if rounding == "nearest":
        return math.floor(exact + Fraction(1, 2))
    if rounding == "ceil":
        return math.ceil(exact)
    if rounding == "floor":
        return math.floor(exact)
    raise ValueError(f"unknown rounding {rounding!r}")


def sample_portion(train: Sequence, pct, seed: int, rounding: str = "nearest") -> list:
    """Prefix of the seeded shuffle of ``train``.

    Portions drawn with the same seed are nested: a smaller ``pct`` is always
    a prefix of a larger one.
    """
    size = portion_size(len(train), pct, rounding)
    if size == 0:
        raise ValueError(f"{pct}% of {len(train)} items is empty")
    return seeded_shuffle(train, seed)[:size]


def lm_normalize(sentence: str) -> SentenceRecord:
    """Lowercase letters; digits, punctuation and other symbols are untouched."""
    return SentenceRecord("".join(ch.lower() if ch.isalpha() else ch for ch in sentence))


def corpus_stats(items: Sequence[str], splitter=sentence_split) -> Stats:
    """Per-item means of sentence count, character count and characters per
    sentence. Items with no sentence contribute 0 to the last column."""
    if not items:
        raise ValueError("empty dataset")
    n_sent = [len(splitter(t)) for t in items]
    n_char = [len(t) for t in items]
    per_sent = [c / s if s else 0.0 for c, s in zip(n_char, n_sent)]
    k = len(items)
    return Stats(k, sum(n_sent) / k, sum(n_char) / k, sum(per_sent) / k)


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", path, lineno) from None
            if not isinstance(obj, dict):
                raise FormatError("each line must hold a JSON object", path, lineno)
            out.append(obj)
    return out


def write_jsonl(objs: Iterable[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for obj in objs:
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=False) + "\n")


def read_pairs(path: str | os.PathLike) -> list[SummaryPair]:
    """Load a ``{"id", "text", "summary"}`` JSON Lines dataset."""
    pairs = []
    seen = set()
    for i, obj in enumerate(read_jsonl(path), start=1):
        try:
            pair = SummaryPair.from_json(obj)
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"record {i}: {e}", path) from None
        if pair.id in seen:
            raise FormatError(f"duplicate id {pair.id!r}", path)
        seen.add(pair.id)
        pairs.append(pair)
    return pairs


def write_pairs(pairs: Iterable[SummaryPair], path: str | os.PathLike) -> None:
    write_jsonl((p.to_json() for p in pairs), path)
