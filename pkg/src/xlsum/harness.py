"""Evaluation reports and end-to-end orchestration.

:func:`evaluate` reports the average sentence and character counts of
generated summaries with ROUGE-1/2/L and bits/char; :func:`compare_reports`
lines several reports up against a baseline; :func:`run_pipeline` chains
alignment, reranking and evaluation from a :class:`PipelineConfig`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

from xlsum import __version__
from xlsum import charlm as clm
from xlsum.alignment import apply_map, load_lexicon, pair_matrices, procrustes, retrieval_report
from xlsum.corpus import corpus_stats, read_pairs, sentence_split
from xlsum.embeddings import load_vec, save_vec, unit_norm
from xlsum.metrics import PRF, corpus_rouge
from xlsum.rerank import ScorerSet, load_external_scores, parse_strategy, read_hypotheses, rerank, write_summaries

__all__ = [
    "EvalReport",
    "PipelineConfig",
    "PipelineError",
    "Comparison",
    "evaluate",
    "sentence_split",
    "compare_reports",
    "run_pipeline",
    "save_report",
    "load_report",
]

logger = logging.getLogger(__name__)

_ROUGE_KEYS = ("rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class EvalReport:
    model_name: str
    n_docs: int
    avg_sentences: float
    avg_chars: float
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF
    bits_per_char: float | None = None

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("n_docs must be >= 1")
        vals = [self.avg_sentences, self.avg_chars]
        vals += [getattr(getattr(self, k), a) for k in _ROUGE_KEYS for a in ("precision", "recall", "f")]
        if self.bits_per_char is not None:
            vals.append(self.bits_per_char)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("report values must be finite")

    def to_json(self) -> dict:
        return {
            "model_name": self.model_name,
            "n_docs": self.n_docs,
            "avg_sentences": self.avg_sentences,
            "avg_chars": self.avg_chars,
            "rouge1": self.rouge1.as_dict(),
            "rouge2": self.rouge2.as_dict(),
            "rougeL": self.rougeL.as_dict(),
            "bits_per_char": self.bits_per_char,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "EvalReport":
        prf = {k: PRF(float(obj[k]["precision"]), float(obj[k]["recall"]), float(obj[k]["f"])) for k in _ROUGE_KEYS}
        bpc = obj.get("bits_per_char")
        return cls(
            str(obj["model_name"]),
            int(obj["n_docs"]),
            float(obj["avg_sentences"]),
            float(obj["avg_chars"]),
            bits_per_char=None if bpc is None else float(bpc),
            **prf,
        )


def save_report(report: EvalReport, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report.to_json(), f, indent=2, ensure_ascii=False)
        f.write("\n")


def load_report(path: str | os.PathLike) -> EvalReport:
    with open(path, encoding="utf-8") as f:
        return EvalReport.from_json(json.load(f))


def evaluate(
    generated: Mapping[str, str],
    references: Mapping[str, str],
    lm: clm.CharLM | None = None,
    model_name: str = "model",
    average: str = "macro",
    beta: float = 1.0,
) -> EvalReport:
    """Score generated summaries against references keyed by document id.

    ROUGE is averaged over documents (``average="micro"`` pools counts
    instead). Bits/char, when ``lm`` is given, is the character-weighted
    mean over the sentences of all generated summaries.

    Raises
    ------
    ValueError
        If the two key sets differ; the message lists the offending ids.
    """
    gk, rk = set(generated), set(references)
    if gk != rk:
        diff = sorted(gk ^ rk)
        raise ValueError(f"document ids differ between generated and references: {diff[:20]}")
    if not gk:
        raise ValueError("nothing to evaluate")
    ids = sorted(gk)
    cands = [generated[i] for i in ids]
    refs = [references[i] for i in ids]
    rouge = {
        "rouge1": corpus_rouge(cands, refs, "rouge1", average, beta),
        "rouge2": corpus_rouge(cands, refs, "rouge2", average, beta),
        "rougeL": corpus_rouge(cands, refs, "rougeL", average, beta),
    }
    st = corpus_stats(cands)
    bpc = None
    if lm is not None:
        sents = [s for c in cands for s in sentence_split(c)]
        bpc = clm.corpus_bits_per_char(lm, sents)
    return EvalReport(model_name, len(ids), st.avg_sentences, st.avg_chars, bits_per_char=bpc, **rouge)


@dataclass
class Comparison:
    """Reports side by side, with deltas against the first (baseline)."""

    columns: tuple[str, ...]
    rows: list[dict]

    def to_tsv(self, percent: bool = True) -> str:
        head = ["model"] + [c for col in self.columns for c in (col, f"d_{col}")]
        lines = ["\t".join(head)]
        for r in self.rows:
            cells = [r["model_name"]]
            for col in self.columns:
                scale = 100.0 if percent and col.startswith("rouge") else 1.0
                cells.append(f"{r['values'][col] * scale:.2f}")
                cells.append(f"{r['deltas'][col] * scale:+.2f}")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"columns": list(self.columns), "rows": self.rows}


def _columns(rep: EvalReport) -> dict:
    cols = {
        "avg_sentences": rep.avg_sentences,
        "avg_chars": rep.avg_chars,
        "rouge1": rep.rouge1.f,
        "rouge2": rep.rouge2.f,
        "rougeL": rep.rougeL.f,
    }
    if rep.bits_per_char is not None:
        cols["bits_per_char"] = rep.bits_per_char
    return cols


def compare_reports(reports: Sequence[EvalReport | Mapping]) -> Comparison:
    """Deltas of every report against the first one."""
    reports = [r if isinstance(r, EvalReport) else EvalReport.from_json(r) for r in reports]
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    cols = [_columns(r) for r in reports]
    keys = tuple(cols[0])
    for r, c in zip(reports, cols):
        if tuple(c) != keys:
            raise ValueError(f"report {r.model_name!r} has metrics {sorted(c)}, baseline has {sorted(keys)}")
    base = cols[0]
    rows = [
        {
            "model_name": r.model_name,
            "values": c,
            "deltas": {k: c[k] - base[k] for k in keys},
        }
        for r, c in zip(reports, cols)
    ]
    return Comparison(keys, rows)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


@dataclass
class PipelineConfig:
    """Inputs and knobs of :func:`run_pipeline`.

    Relative paths are resolved against ``base_dir`` (the config file's
    directory when loaded with :meth:`from_file`). Alignment runs when
    ``src_vec``, ``tgt_vec`` and ``lexicon`` are all set; otherwise
    ``emb_vec`` is used directly for the embedding score. The LM comes from
    ``lm_model``, or is trained from ``lm_corpus``.
    """

    hypotheses: str
    references: str
    out_dir: str = "out"
    src_vec: str | None = None
    tgt_vec: str | None = None
    lexicon: str | None = None
    test_lexicon: str | None = None
    emb_vec: str | None = None
    lm_model: str | None = None
    lm_corpus: str | None = None
    external_scores: str | None = None
    strategy: str = "filter:rouge_l:32,best:bert_score"
    scorers: tuple[str, ...] = ("rouge_l", "bert_score", "internal_loss", "lm_perplexity")
    model_name: str = "pipeline"
    seed: int = 0
    lm_order: int = 6
    beam_width: int = 64
    dedupe_min_n: int = 3
    dedupe_max_n: int = 10
    beta: float = 1.0
    unit_norm: bool = False
    threads: int = 1
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        self.scorers = tuple(self.scorers)
        parse_strategy(self.strategy)
        if self.lm_order < 1 or self.beam_width < 1 or self.threads < 1:
            raise ValueError("lm_order, beam_width and threads must be positive")
        if not 1 <= self.dedupe_min_n <= self.dedupe_max_n:
            raise ValueError("need 1 <= dedupe_min_n <= dedupe_max_n")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        raw.setdefault("base_dir", str(path.parent))
        raw.update(overrides)
        return cls(**raw)

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["scorers"] = list(self.scorers)
        return d


_INPUT_KEYS = (
    "hypotheses",
    "references",
    "src_vec",
    "tgt_vec",
    "lexicon",
    "test_lexicon",
    "emb_vec",
    "lm_model",
    "lm_corpus",
    "external_scores",
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(config: PipelineConfig) -> tuple[EvalReport, dict]:
    """Align, rerank and evaluate; write outputs into ``config.out_dir``.

    Writes ``summaries.jsonl``, ``report.json`` and ``manifest.json``, plus
    ``aligned.vec`` and ``charlm.clm`` when those stages run. On failure
    every file written by this call is removed and :class:`PipelineError`
    names the stage.

    Returns the report and a mapping of output name to path.
    """
    out_dir = config.resolve(config.out_dir)
    written: list[Path] = []
    stage = "setup"
    try:
        for key in _INPUT_KEYS:
            p = config.resolve(getattr(config, key))
            if p is not None and not p.is_file():
                raise FileNotFoundError(f"{key}: {p}")
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs: dict[str, Path] = {}
        alignment_info = None

        stage = "align"
        emb = None
        if config.src_vec and config.tgt_vec and config.lexicon:
            src = load_vec(config.resolve(config.src_vec))
            tgt = load_vec(config.resolve(config.tgt_vec))
            if config.unit_norm:
                src, tgt = unit_norm(src), unit_norm(tgt)
            lex = load_lexicon(config.resolve(config.lexicon))
            X, Y, kept = pair_matrices(lex, tgt, src)
            m = procrustes(X, Y)
            emb = apply_map(m, tgt)
            alignment_info = {"pairs_used": len(kept), "pairs_total": len(lex), "train_loss": m.train_loss}
            if config.test_lexicon:
                rep = retrieval_report(emb, src, load_lexicon(config.resolve(config.test_lexicon)), ks=(1, 5, 10))
                alignment_info["precision_at_k"] = {str(k): v for k, v in rep.precision.items()}
                alignment_info["test_pairs_evaluated"] = rep.n_evaluated
            outputs["aligned_vec"] = out_dir / "aligned.vec"
            written.append(outputs["aligned_vec"])
            save_vec(emb, outputs["aligned_vec"])
        elif config.emb_vec:
            emb = load_vec(config.resolve(config.emb_vec))

        stage = "charlm"
        lm = None
        if config.lm_model:
            lm = clm.load(config.resolve(config.lm_model))
        elif config.lm_corpus:
            with open(config.resolve(config.lm_corpus), encoding="utf-8") as f:
                lines = [ln.rstrip("\n") for ln in f if ln.strip()]
            lm = clm.train(lines, order=config.lm_order, seed=config.seed)
            outputs["charlm"] = out_dir / "charlm.clm"
            written.append(outputs["charlm"])
            clm.save(lm, outputs["charlm"])

        stage = "rerank"
        external = load_external_scores(config.resolve(config.external_scores)) if config.external_scores else None
        scorers = ScorerSet(config.scorers, emb=emb, lm=lm, external=external, beta=config.beta)
        hsets = read_hypotheses(config.resolve(config.hypotheses), config.beam_width)
        outs = rerank(
            hsets, config.strategy, scorers, config.dedupe_min_n, config.dedupe_max_n, threads=config.threads
        )
        outputs["summaries"] = out_dir / "summaries.jsonl"
        written.append(outputs["summaries"])
        write_summaries(outs, outputs["summaries"])

        stage = "evaluate"
        refs = {p.id: p.summary for p in read_pairs(config.resolve(config.references))}
        gen = {o.doc_id: o.summary for o in outs}
        report = evaluate(gen, refs, lm=lm, model_name=config.model_name, beta=config.beta)
        outputs["report"] = out_dir / "report.json"
        written.append(outputs["report"])
        save_report(report, outputs["report"])

        stage = "manifest"
        echo = config.echo()
        manifest = {
            "tool": "xlsum",
            "version": __version__,
            "config": echo,
            "config_hash": hashlib.sha256(json.dumps(echo, sort_keys=True).encode("utf-8")).hexdigest(),
            "seed": config.seed,
            "strategy": str(parse_strategy(config.strategy)),
            "inputs": {
                k: _sha256(config.resolve(getattr(config, k))) for k in _INPUT_KEYS if getattr(config, k) is not None
            },
            "outputs": {k: _sha256(p) for k, p in sorted(outputs.items())},
            "alignment": alignment_info,
        }
        outputs["manifest"] = out_dir / "manifest.json"
        written.append(outputs["manifest"])
        with open(outputs["manifest"], "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest, f, indent=2, ensure_ascii=False)
            f.write("\n")
        return report, outputs
    except Exception as e:
        for p in written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        raise PipelineError(stage, e) from e
