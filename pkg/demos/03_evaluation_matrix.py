"""Score predictions and run the level x CoT matrix with a mock model.

Run with ``python demos/03_evaluation_matrix.py``.  Nothing here contacts a
network endpoint; see the README for live runs.
"""
from __future__ import annotations

from attribqa import parse_answer
from attribqa.citations import Passage
from attribqa.client import EchoGoldClient, FaultInjector
from attribqa.metrics import lexical_judge, score_example
from attribqa.pipeline import RunSpec, render_markdown, run_matrix
from attribqa.prompting import build_cot_prefix
from attribqa.synthetic import make_corpus

passages = [Passage(1, "alpha beta gamma"), Passage(2, "delta epsilon")]
gold = parse_answer("alpha beta [1]. delta epsilon [2].", "sentence")
pred = parse_answer("alpha beta [1]. delta epsilon [1].", "sentence")

# one example, every metric
rep = score_example(pred, gold, passages, lexical_judge(0.5))
for name, value in rep.per_metric.items():
    print(f"{name:10s} {value:.3f}")
print("pending:", [k for k, v in rep.applicability.items() if v.value == "ExternalPending"])

# the chain-of-thought prefix a fewshot exemplar carries
corpus = make_corpus(30, seed=7)
print("\n" + build_cot_prefix(corpus[0].gold, corpus[0].passages, "span"))

# a model that repeats the gold answer scores 100 on the deterministic metrics
print("\necho-gold model:")
print(render_markdown(run_matrix(corpus, RunSpec(k_fewshot=2))))

# a model that fails 10% of the time and babbles 30% of the time
noisy = FaultInjector(EchoGoldClient(), failure_rate=0.1, malformed_rate=0.3, seed=1)
report = run_matrix(corpus, RunSpec(levels=["span"], methods=["none", "span"], k_fewshot=2), noisy)
print("faulty model:")
print(render_markdown(report))
cell = report.cell("span", "none")
print("failed requests:", cell.n_failed, "parse statuses:", cell.parse_counts)
