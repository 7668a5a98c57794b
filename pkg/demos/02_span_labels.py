"""Derive span labels from a passage-labeled answer.

The greedy marker looks for long substrings shared by the answer and the
cited passages and keeps those that touch a named entity.

Run with ``python demos/02_span_labels.py``.
"""
from __future__ import annotations

import numpy as np

from attribqa import Passage, cited_indices, convert_example, csca, parse_answer, serialize, strip_citations
from attribqa.labeling import builtin_entity_recognizer, mark_spans
from attribqa.synthetic import passage_labeled_corpus

passages = [
    Passage(1, "Ada Lovelace wrote the first program in 1843, for the Analytical Engine."),
    Passage(2, "The Analytical Engine was designed by Charles Babbage but never built."),
    Passage(3, "Unrelated filler about gardening."),
]
answer = "Ada Lovelace wrote the first program for a machine designed by Charles Babbage."

# entities found by the built-in heuristic tagger
rec = builtin_entity_recognizer()
print("entities:", [answer[e.start:e.end] for e in rec.recognize(answer)])

# raw marks: (start, end, passage)
for m in mark_spans(answer, passages, rec, min_len=10):
    print(f"  {m.passage_index}: {answer[m.start:m.end]!r}")

# only the cited passages are searched
ex = convert_example("who wrote the first program?", passages, answer, {1, 2}, rec)
print("\nspan answer:", serialize(ex.gold))
print("coverage: %.2f" % ex.meta["coverage"])

# copied spans are verbatim by construction
print("CSCA:", csca(ex.gold, passages))

# the same over a small synthetic corpus
cov = []
for r in passage_labeled_corpus(200, seed=3):
    ps = [Passage(i + 1, p["text"], p.get("title")) for i, p in enumerate(r["passages"])]
    a = parse_answer(r["answer"], "passage")
    ex = convert_example(r["question"], ps, strip_citations(a), cited_indices(a), rec)
    cov.append(ex.meta["coverage"])
cov = np.asarray(cov)
print(f"\ncoverage over 200 answers: mean {cov.mean():.2f}, median {np.median(cov):.2f}, "
      f"below 0.1: {(cov < 0.1).mean():.0%}")
