"""
Reranking beams and running the whole pipeline
==============================================

Each extracted sentence comes with a beam of paraphrase hypotheses. Picking
by the decoder's own loss is compared with metric-based selection, then the
bundled demo inputs are pushed through alignment, reranking and evaluation.
"""

import tempfile
from pathlib import Path

from xlsum.harness import PipelineConfig, compare_reports, evaluate, run_pipeline
from xlsum.rerank import ScorerSet, rerank
from xlsum.synthetic import rerank_fixture

hsets, refs, emb, _ = rerank_fixture(n_docs=50, beam_width=64, seed=0)
gold = {k: v.summary for k, v in refs.items()}
scorers = ScorerSet(("rouge_l", "bert_score", "internal_loss"), emb=emb)

reports = []
for strategy in ("best:internal_loss", "filter:rouge_l:32,best:bert_score", "best:rouge_l"):
    outs = rerank(hsets, strategy, scorers)
    reports.append(evaluate({o.doc_id: o.summary for o in outs}, gold, model_name=strategy))
print(compare_reports(reports).to_tsv())

demo = Path(__file__).resolve().parents[1] / "data" / "demo" / "config.json"
with tempfile.TemporaryDirectory() as out:
    report, outputs = run_pipeline(PipelineConfig.from_file(demo, out_dir=out))
    print(f"ROUGE-L F {report.rougeL.f:.3f}, bits/char {report.bits_per_char:.2f}")
    print(sorted(outputs))
