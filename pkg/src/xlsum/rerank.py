"""Output selection over wide decoder beams.

Every hypothesis for an extracted article sentence is cleaned of repeated
n-grams, scored by up to four heuristics and selected either by one score or
by filtering on one score and rescoring the survivors with another.

All scores are oriented so that higher is better: ROUGE-L and the embedding
score are used as is, internal loss and LM bits/char are negated.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from xlsum.charlm import CharLM, bits_per_char
from xlsum.corpus import read_jsonl, write_jsonl
from xlsum.embeddings import EmbeddingTable
from xlsum.errors import FormatError, HypothesisFormatError
from xlsum.metrics import embed_score, rouge_l

__all__ = [
    "Hypothesis",
    "HypothesisSet",
    "ScoredHypothesis",
    "ArgBest",
    "FilterThenRescore",
    "ScorerSet",
    "SummaryOut",
    "ChosenRecord",
    "dedupe_repeats",
    "parse_strategy",
    "register_scorer",
    "score_beam",
    "select",
    "assemble_summary",
    "read_hypotheses",
    "write_hypotheses",
    "read_summaries",
    "write_summaries",
    "load_external_scores",
    "rerank",
]

DEFAULT_BEAM_WIDTH = 64
BUILTIN_SCORERS = ("rouge_l", "bert_score", "internal_loss", "lm_perplexity")


@dataclass(frozen=True)
class Hypothesis:
    text: str
    internal_loss: float

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("hypothesis text must be non-empty")


@dataclass(frozen=True)
class HypothesisSet:
    doc_id: str
    article_sentences: tuple[str, ...]
    extracted: tuple[int, ...]
    beams: tuple[tuple[Hypothesis, ...], ...]

    def validate(self, beam_width: int = DEFAULT_BEAM_WIDTH) -> "HypothesisSet":
        n = len(self.article_sentences)
        if len(self.beams) != len(self.extracted):
            raise HypothesisFormatError(
                f"doc {self.doc_id!r}: {len(self.beams)} beams for {len(self.extracted)} extracted sentences"
            )
        prev = -1
        for i in self.extracted:
            if not 0 <= i < n:
                raise HypothesisFormatError(f"doc {self.doc_id!r}: extracted index {i} out of range [0, {n})")
            if i <= prev:
                raise HypothesisFormatError(f"doc {self.doc_id!r}: extracted indices must be strictly increasing")
            prev = i
        for j, beam in enumerate(self.beams):
            if not beam:
                raise HypothesisFormatError(f"doc {self.doc_id!r}: beam {j} is empty")
            if len(beam) > beam_width:
                raise HypothesisFormatError(f"doc {self.doc_id!r}: beam {j} has {len(beam)} > {beam_width} hypotheses")
        return self

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "article_sentences": list(self.article_sentences),
            "extracted": list(self.extracted),
            "beams": [[{"text": h.text, "loss": h.internal_loss} for h in beam] for beam in self.beams],
        }

    @classmethod
    def from_json(cls, obj: dict, beam_width: int = DEFAULT_BEAM_WIDTH) -> "HypothesisSet":
        try:
            hset = cls(
                str(obj["doc_id"]),
                tuple(obj["article_sentences"]),
                tuple(int(i) for i in obj["extracted"]),
                tuple(tuple(Hypothesis(h["text"], float(h["loss"])) for h in beam) for beam in obj["beams"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise HypothesisFormatError(f"malformed hypotheses record: {e!r}") from None
        return hset.validate(beam_width)


@dataclass(frozen=True)
class ScoredHypothesis:
    hypothesis: Hypothesis
    index: int
    scores: dict

    @property
    def text(self) -> str:
        return self.hypothesis.text


@dataclass(frozen=True)
class ArgBest:
    scorer: str

    def __str__(self):
        return f"best:{self.scorer}"

    @property
    def scorers(self) -> tuple[str, ...]:
        return (self.scorer,)


@dataclass(frozen=True)
class FilterThenRescore:
    scorer_a: str
    scorer_b: str
    k: int = 32

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def __str__(self):
        return f"filter:{self.scorer_a}:{self.k},best:{self.scorer_b}"

    @property
    def scorers(self) -> tuple[str, ...]:
        return (self.scorer_a, self.scorer_b)


def parse_strategy(spec: str) -> ArgBest | FilterThenRescore:
    """Parse ``"best:NAME"`` or ``"filter:NAME:K,best:NAME"``."""
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    try:
        if len(parts) == 1:
            kind, name = parts[0].split(":")
            if kind == "best":
                return ArgBest(_check_name(name))
        elif len(parts) == 2:
            kind_a, name_a, k = parts[0].split(":")
            kind_b, name_b = parts[1].split(":")
            if kind_a == "filter" and kind_b == "best":
                return FilterThenRescore(_check_name(name_a), _check_name(name_b), int(k))
    except ValueError as e:
        if "unknown scorer" in str(e):
            raise
    raise ValueError(f"cannot parse selection strategy {spec!r}")


_REGISTRY: dict[str, Callable] = {}


def register_scorer(name: str, fn: Callable[["Hypothesis", str, "ScorerSet", tuple], float]) -> None:
    """Add a scorer. ``fn(hyp, reference, scorer_set, key)`` must return an
    oriented (higher is better) finite value; ``key`` is
    ``(doc_id, beam_index, hyp_index)``."""
    _REGISTRY[name] = fn


def _check_name(name: str) -> str:
    if name not in _REGISTRY:
        raise ValueError(f"unknown scorer {name!r}; known: {sorted(_REGISTRY)}")
    return name


@dataclass
class ScorerSet:
    """Configured scorers and the read-only resources they need."""

    names: tuple[str, ...] = BUILTIN_SCORERS
    emb: EmbeddingTable | None = None
    lm: CharLM | None = None
    external: dict | None = None
    beta: float = 1.0

    def __post_init__(self):
        self.names = tuple(dict.fromkeys(self.names))
        for n in self.names:
            _check_name(n)
        if "bert_score" in self.names and self.emb is None:
            raise ValueError("scorer 'bert_score' needs an embedding table")
        if "lm_perplexity" in self.names and self.lm is None and self.external is None:
            raise ValueError("scorer 'lm_perplexity' needs a character LM or an external scores file")


def _rouge_l(hyp, ref, ss, key):
    return rouge_l(hyp.text, ref, ss.beta).f


def _bert_score(hyp, ref, ss, key):
    try:
        return embed_score(hyp.text, ref, ss.emb).f
    except ValueError:
        # nothing in vocabulary on one side: no evidence of content overlap
        return 0.0


def _internal_loss(hyp, ref, ss, key):
    return -hyp.internal_loss


def _lm_perplexity(hyp, ref, ss, key):
    if ss.external is not None:
        try:
            return -ss.external[key]
        except KeyError:
            raise KeyError(f"external perplexity file has no entry for {key}") from None
    return -bits_per_char(ss.lm, hyp.text).bits_per_char


for _name, _fn in zip(BUILTIN_SCORERS, (_rouge_l, _bert_score, _internal_loss, _lm_perplexity)):
    register_scorer(_name, _fn)


def dedupe_repeats(text: str, min_n: int = 3, max_n: int = 10) -> str:
    """Collapse immediately repeated token n-grams, longest n first.

    For ``n`` from ``max_n`` down to ``min_n``, whenever the ``n`` tokens at
    position ``i`` are followed by the same ``n`` tokens, the second copy is
    removed. Passes repeat until nothing changes. Tokens are whitespace
    separated and rejoined with single spaces.

    >>> dedupe_repeats("kema puconci so v kema puconci so v gosteh")
    'kema puconci so v gosteh'
    """
    if min_n < 1 or max_n < min_n:
        raise ValueError("need 1 <= min_n <= max_n")
    toks = text.split()
    changed = True
    while changed:
        changed = False
        for n in range(max_n, min_n - 1, -1):
            i = 0
            while i + 2 * n <= len(toks):
                if toks[i : i + n] == toks[i + n : i + 2 * n]:
                    del toks[i + n : i + 2 * n]
                    changed = True
                else:
                    i += 1
    return " ".join(toks)


def score_beam(
    beam: Sequence[Hypothesis],
    extracted_sentence: str,
    scorers: ScorerSet,
    doc_id: str | None = None,
    beam_index: int | None = None,
) -> list[ScoredHypothesis]:
    """Score each hypothesis against the extracted sentence it rewrites."""
    if not beam:
        raise ValueError("empty beam")
    out = []
    for j, hyp in enumerate(beam):
        key = (doc_id, beam_index, j)
        scores = {}
        for name in scorers.names:
            v = float(_REGISTRY[name](hyp, extracted_sentence, scorers, key))
            if not math.isfinite(v):
                raise ValueError(f"scorer {name!r} returned non-finite value for hypothesis {key}")
            scores[name] = v
        out.append(ScoredHypothesis(hyp, j, scores))
    return out


def _argbest(items: Sequence[ScoredHypothesis], name: str) -> ScoredHypothesis:
    best = items[0]
    for s in items[1:]:
        if s.scores[name] > best.scores[name]:
            best = s
    return best


def select(scored: Sequence[ScoredHypothesis], strategy: ArgBest | FilterThenRescore) -> ScoredHypothesis:
    """Pick one hypothesis; ties go to the earliest beam position."""
    if not scored:
        raise ValueError("nothing to select from")
    for name in strategy.scorers:
        _check_name(name)
        if name not in scored[0].scores:
            raise ValueError(f"scorer {name!r} was not computed for this beam")
    items = sorted(scored, key=lambda s: s.index)
    if isinstance(strategy, ArgBest):
        return _argbest(items, strategy.scorer)
    a = strategy.scorer_a
    top = sorted(items, key=lambda s: (-s.scores[a], s.index))[: strategy.k]
    top.sort(key=lambda s: s.index)
    return _argbest(top, strategy.scorer_b)


@dataclass(frozen=True)
class ChosenRecord:
    extracted_index: int
    hyp_index: int
    scores: dict

    def to_json(self) -> dict:
        return {"extracted_index": self.extracted_index, "hyp_index": self.hyp_index, "scores": dict(self.scores)}


@dataclass(frozen=True)
class SummaryOut:
    doc_id: str
    summary: str
    chosen: tuple[ChosenRecord, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "summary": self.summary, "chosen": [c.to_json() for c in self.chosen]}

    @classmethod
    def from_json(cls, obj: dict) -> "SummaryOut":
        try:
            chosen = tuple(
                ChosenRecord(int(c["extracted_index"]), int(c["hyp_index"]), dict(c["scores"])) for c in obj["chosen"]
            )
            return cls(str(obj["doc_id"]), obj["summary"], chosen)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed summary record: {e!r}") from None


def assemble_summary(
    hset: HypothesisSet,
    strategy: ArgBest | FilterThenRescore,
    scorers: ScorerSet,
    min_n: int = 3,
    max_n: int = 10,
) -> SummaryOut:
    """Clean, score and select one hypothesis per extracted sentence.

    Chosen texts are joined with single spaces in extracted order; a chosen
    text identical to an earlier one is left out of the summary (its record
    is still reported in ``chosen``).
    """
    for name in strategy.scorers:
        if name not in scorers.names:
            raise ValueError(f"strategy uses scorer {name!r} which is not configured")
    chosen = []
    texts: list[str] = []
    for b, (idx, beam) in enumerate(zip(hset.extracted, hset.beams)):
        cleaned = [Hypothesis(dedupe_repeats(h.text, min_n, max_n), h.internal_loss) for h in beam]
        scored = score_beam(cleaned, hset.article_sentences[idx], scorers, hset.doc_id, b)
        best = select(scored, strategy)
        chosen.append(ChosenRecord(idx, best.index, best.scores))
        if best.text not in texts:
            texts.append(best.text)
    return SummaryOut(hset.doc_id, " ".join(texts), tuple(chosen))


def read_hypotheses(path: str | os.PathLike, beam_width: int = DEFAULT_BEAM_WIDTH) -> list[HypothesisSet]:
    out = []
    seen = set()
    for i, obj in enumerate(read_jsonl(path), start=1):
        try:
            hset = HypothesisSet.from_json(obj, beam_width)
        except HypothesisFormatError as e:
            raise HypothesisFormatError(f"record {i}: {e}", path) from None
        if hset.doc_id in seen:
            raise HypothesisFormatError(f"duplicate doc_id {hset.doc_id!r}", path)
        seen.add(hset.doc_id)
        out.append(hset)
    return out


def write_hypotheses(hsets: Iterable[HypothesisSet], path: str | os.PathLike) -> None:
    write_jsonl((h.to_json() for h in hsets), path)


def read_summaries(path: str | os.PathLike) -> list[SummaryOut]:
    return [SummaryOut.from_json(o) for o in read_jsonl(path)]


def write_summaries(outs: Iterable[SummaryOut], path: str | os.PathLike) -> None:
    write_jsonl((o.to_json() for o in outs), path)


def load_external_scores(path: str | os.PathLike) -> dict:
    """Read ``doc_id<TAB>beam_index<TAB>hyp_index<TAB>bits_per_char`` lines."""
    table = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise FormatError(f"expected 4 tab-separated fields, found {len(fields)}", path, lineno)
            try:
                key = (fields[0], int(fields[1]), int(fields[2]))
                val = float(fields[3])
            except ValueError:
                raise FormatError("non-numeric index or score", path, lineno) from None
            if not math.isfinite(val) or val < 0:
                raise FormatError("bits/char must be finite and non-negative", path, lineno)
            table[key] = val
    return table


def rerank(
    hsets: Sequence[HypothesisSet],
    strategy: ArgBest | FilterThenRescore | str,
    scorers: ScorerSet,
    min_n: int = 3,
    max_n: int = 10,
    threads: int = 1,
) -> list[SummaryOut]:
    """:func:`assemble_summary` over many documents, output in input order."""
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)

    def one(h):
        return assemble_summary(h, strategy, scorers, min_n, max_n)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, hsets))
    return [one(h) for h in hsets]

