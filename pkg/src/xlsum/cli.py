"""``xlsum`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from xlsum import __version__
from xlsum import charlm as clm
from xlsum.alignment import apply_map, load_lexicon, pair_matrices, procrustes, retrieval_report
from xlsum.corpus import (
    SplitSpec,
    SummaryPair,
    corpus_stats,
    length_filter,
    make_splits,
    read_jsonl,
    read_pairs,
    sample_portion,
    sentence_split,
    split_first_paragraph,
    write_pairs,
)
from xlsum.embeddings import load_vec, save_vec, unit_norm
from xlsum.errors import FormatError
from xlsum.harness import PipelineConfig, PipelineError, compare_reports, evaluate, load_report, run_pipeline, save_report
from xlsum.rerank import (
    BUILTIN_SCORERS,
    ScorerSet,
    load_external_scores,
    read_hypotheses,
    read_summaries,
    rerank,
    write_summaries,
)

log = logging.getLogger("xlsum")


def _emit(args, obj, rows=None):
    """Print ``obj`` as JSON, or ``rows`` (list of lists) as TSV."""
    if args.format == "tsv" and rows is not None:
        for r in rows:
            print("\t".join(str(x) for x in r))
    else:
        print(json.dumps(obj, indent=2, ensure_ascii=False))


def _raw_to_pair(obj, i, budget, max_lead):
    doc_id = str(obj.get("id", i))
    if "summary" in obj and "text" in obj:
        return SummaryPair(doc_id, obj["text"], obj["summary"])
    sents = obj.get("sentences")
    if sents is None:
        sents = sentence_split(obj["text"])
    summary, body = split_first_paragraph(sents, budget, max_lead)
    return SummaryPair(doc_id, body, summary)


def cmd_prepare_corpus(args):
    pairs, skipped = [], 0
    for i, obj in enumerate(read_jsonl(args.input)):
        try:
            pairs.append(_raw_to_pair(obj, i, args.budget_chars, args.max_lead))
        except ValueError:
            skipped += 1
    kept = length_filter(pairs, args.min, args.max, args.measure)
    train, val, test = make_splits(kept, SplitSpec(args.test, args.val, args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("val", val), ("test", test)):
        write_pairs(part, out / f"{name}.jsonl")
    summary = {"input": len(pairs) + skipped, "unsplittable": skipped, "kept": len(kept),
               "train": len(train), "val": len(val), "test": len(test)}
    if kept:
        st = corpus_stats([p.summary for p in kept])
        summary["summary_avg_sentences"] = st.avg_sentences
        summary["summary_avg_chars"] = st.avg_chars
    _emit(args, summary, [[k, v] for k, v in summary.items()])


def cmd_sample_portion(args):
    pairs = read_pairs(args.input)
    part = sample_portion(pairs, args.pct, args.seed, args.rounding)
    write_pairs(part, args.out)
    _emit(args, {"pct": args.pct, "n_in": len(pairs), "n_out": len(part)}, [[args.pct, len(pairs), len(part)]])


def cmd_align(args):
    src, tgt = load_vec(args.src), load_vec(args.tgt)
    if args.unit_norm:
        src, tgt = unit_norm(src), unit_norm(tgt)
    lex = load_lexicon(args.dict)
    X, Y, kept = pair_matrices(lex, tgt, src)
    m = procrustes(X, Y)
    save_vec(apply_map(m, tgt), args.out)
    info = {"pairs_used": len(kept), "pairs_total": len(lex), "train_loss": m.train_loss, "out": args.out}
    _emit(args, info, [[k, v] for k, v in info.items()])


def cmd_eval_alignment(args):
    ks = [int(k) for k in args.k.split(",")]
    rep = retrieval_report(load_vec(args.mapped), load_vec(args.src), load_lexicon(args.dict), ks)
    obj = {"precision_at_k": {str(k): v for k, v in rep.precision.items()},
           "n_evaluated": rep.n_evaluated, "n_oov": rep.n_oov}
    _emit(args, obj, [["k", "precision"]] + [[k, f"{v:.4f}"] for k, v in rep.precision.items()])


def cmd_train_charlm(args):
    with open(args.corpus, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    model = clm.train(lines, order=args.order, min_char_count=args.min_char_count,
                      tune=not args.no_tune, seed=args.seed, max_chars=args.max_chars)
    clm.save(model, args.out)
    info = {"order": model.order, "symbols": model.vocab_size, "contexts": len(model.contexts()),
            "discounts": list(model.discounts), "out": args.out}
    _emit(args, info, [[k, v] for k, v in info.items()])


def cmd_perplexity(args):
    model = clm.load(args.model)
    texts = [obj[args.field] for obj in read_jsonl(args.input)]
    bpc = clm.corpus_bits_per_char(model, texts, macro=args.macro)
    _emit(args, {"bits_per_char": bpc, "n_texts": len(texts), "average": "macro" if args.macro else "micro"},
          [[bpc, len(texts)]])


def cmd_rerank(args):
    names = tuple(args.scorers.split(",")) if args.scorers else BUILTIN_SCORERS
    if not args.scorers:
        names = tuple(n for n in names if not (n == "bert_score" and not args.emb)
                      and not (n == "lm_perplexity" and not (args.lm or args.external)))
    emb = load_vec(args.emb) if args.emb else None
    lm = clm.load(args.lm) if args.lm else None
    ext = load_external_scores(args.external) if args.external else None
    scorers = ScorerSet(names, emb=emb, lm=lm, external=ext, beta=args.beta)
    hsets = read_hypotheses(args.hyps, args.beam_width)
    outs = rerank(hsets, args.strategy, scorers, args.min_n, args.max_n, threads=args.threads)
    write_summaries(outs, args.out)
    _emit(args, {"documents": len(outs), "strategy": args.strategy, "out": args.out}, [[len(outs), args.out]])


def cmd_evaluate(args):
    gen = {s.doc_id: s.summary for s in read_summaries(args.generated)}
    refs = {p.id: p.summary for p in read_pairs(args.references)}
    lm = clm.load(args.lm) if args.lm else None
    rep = evaluate(gen, refs, lm=lm, model_name=args.name, average="micro" if args.micro else "macro",
                   beta=args.beta)
    if args.out:
        save_report(rep, args.out)
    row = [rep.model_name, f"{rep.avg_sentences:.2f}", f"{rep.avg_chars:.2f}", f"{rep.rouge1.f * 100:.2f}",
           f"{rep.rouge2.f * 100:.2f}", f"{rep.rougeL.f * 100:.2f}",
           "/" if rep.bits_per_char is None else f"{rep.bits_per_char:.2f}"]
    _emit(args, rep.to_json(), [["model", "sentences", "characters", "ROUGE-1", "ROUGE-2", "ROUGE-L", "perplexity"], row])


def cmd_compare(args):
    cmp = compare_reports([load_report(p) for p in args.reports])
    if args.format == "tsv":
        sys.stdout.write(cmp.to_tsv())
    else:
        _emit(args, cmp.to_json())


def cmd_pipeline(args):
    overrides = {}
    if args.out_dir:
        overrides["out_dir"] = str(Path(args.out_dir).resolve())
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads:
        overrides["threads"] = args.threads
    cfg = PipelineConfig.from_file(args.config, **overrides)
    report, outputs = run_pipeline(cfg)
    _emit(args, {"report": report.to_json(), "outputs": {k: str(v) for k, v in outputs.items()}})


def cmd_make_fixture(args):
    from xlsum.synthetic import write_demo_fixture

    path = write_demo_fixture(args.out_dir, seed=args.seed or 0, n_docs=args.n_docs)
    _emit(args, {"config": str(path)}, [[path]])


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress):
        # Subcommand copies must not reset values given before the subcommand.
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=d(None), help="random seed (default 0)")
        g.add_argument("--threads", type=int, default=d(1))
        g.add_argument("--format", choices=("json", "tsv"), default=d("json"))
        g.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return g

    common = global_flags(suppress=True)
    p = argparse.ArgumentParser(prog="xlsum", description=__doc__, parents=[global_flags(suppress=False)])
    p.add_argument("--version", action="version", version=f"xlsum {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    sp = add("prepare-corpus", cmd_prepare_corpus, "filter and split a raw news corpus")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--min", type=int, default=1000)
    sp.add_argument("--max", type=int, default=3000)
    sp.add_argument("--measure", choices=("total", "body"), default="total")
    sp.add_argument("--test", type=int, default=5000)
    sp.add_argument("--val", type=int, default=5000)
    sp.add_argument("--budget-chars", type=int, default=300)
    sp.add_argument("--max-lead", type=int, default=3)
    sp.add_argument("--out-dir", required=True)

    sp = add("sample-portion", cmd_sample_portion, "nested fine-tuning portion of a training set")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--pct", type=float, required=True)
    sp.add_argument("--rounding", choices=("nearest", "ceil", "floor"), default="nearest")
    sp.add_argument("--out", required=True)

    sp = add("align", cmd_align, "map target embeddings into the source space")
    sp.add_argument("--src", required=True)
    sp.add_argument("--tgt", required=True)
    sp.add_argument("--dict", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--unit-norm", action="store_true")

    sp = add("eval-alignment", cmd_eval_alignment, "translation retrieval precision@k")
    sp.add_argument("--mapped", required=True)
    sp.add_argument("--src", required=True)
    sp.add_argument("--dict", required=True)
    sp.add_argument("--k", default="1,5,10")

    sp = add("train-charlm", cmd_train_charlm, "train a character n-gram LM")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--order", type=int, default=6)
    sp.add_argument("--min-char-count", type=int, default=2)
    sp.add_argument("--max-chars", type=int, default=None)
    sp.add_argument("--no-tune", action="store_true", help="keep discount 0.75 at every order")
    sp.add_argument("--out", required=True)

    sp = add("perplexity", cmd_perplexity, "bits per character of a JSONL text field")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--field", default="summary")
    sp.add_argument("--macro", action="store_true")

    sp = add("rerank", cmd_rerank, "select hypotheses and assemble summaries")
    sp.add_argument("--hyps", required=True)
    sp.add_argument("--strategy", default="filter:rouge_l:32,best:bert_score")
    sp.add_argument("--scorers", default=None, help="comma list; default: all with resources available")
    sp.add_argument("--emb")
    sp.add_argument("--lm")
    sp.add_argument("--external", help="TSV of precomputed bits/char per hypothesis")
    sp.add_argument("--beam-width", type=int, default=64)
    sp.add_argument("--min-n", type=int, default=3)
    sp.add_argument("--max-n", type=int, default=10)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--out", required=True)

    sp = add("evaluate", cmd_evaluate, "ROUGE / length / perplexity report")
    sp.add_argument("--generated", required=True, help="summaries JSONL (doc_id, summary)")
    sp.add_argument("--references", required=True, help="dataset JSONL (id, text, summary)")
    sp.add_argument("--lm")
    sp.add_argument("--name", default="model")
    sp.add_argument("--micro", action="store_true")
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--out")

    sp = add("compare", cmd_compare, "deltas of reports against the first one")
    sp.add_argument("reports", nargs="+")

    sp = add("pipeline", cmd_pipeline, "run align, rerank and evaluate from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir")

    sp = add("make-fixture", cmd_make_fixture, "write the synthetic demo inputs")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n-docs", type=int, default=20)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command != "pipeline" and args.seed is None:
        args.seed = 0
    try:
        args.func(args)
    except (FormatError, PipelineError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"xlsum {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
