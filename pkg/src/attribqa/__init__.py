"""Attributed question answering: citation markup, span labeling, prompting, metrics, evaluation runs."""

from __future__ import annotations

from .citations import (
    AttributedAnswer,
    CitationLevel,
    CitedSentence,
    CitedSpan,
    Passage,
    PlainText,
    TerminalCitationBlock,
    canonicalize,
    cited_content,
    cited_indices,
    convert_level,
    parse_answer,
    serialize,
    strip_citations,
)
from .client import (
    CannedClient,
    EchoGoldClient,
    FaultInjector,
    GenerationConfig,
    OpenAICompatibleClient,
    batch_complete,
)
from .dataset import QAExample, load_dataset
from .labeling import SpanMark, build_span_answer, convert_example, mark_spans
from .metrics import (
    MetricReport,
    alce_citation_pr,
    alce_f1,
    csca,
    doc_f1,
    lexical_judge,
    rouge_l,
    score_example,
    sem_f1,
    token_f1,
)
from .pipeline import AggregateReport, RunSpec, convert_corpus, emit_report, run_matrix
from .prompting import CoTMethod, PromptBundle, build_cot_prefix, build_prompt, select_fewshot, split_response

__version__ = "0.1.0"

__all__ = [
    "AttributedAnswer",
    "CitationLevel",
    "CitedSentence",
    "CitedSpan",
    "Passage",
    "PlainText",
    "TerminalCitationBlock",
    "canonicalize",
    "cited_content",
    "cited_indices",
    "convert_level",
    "parse_answer",
    "serialize",
    "strip_citations",
    "CannedClient",
    "EchoGoldClient",
    "FaultInjector",
    "GenerationConfig",
    "OpenAICompatibleClient",
    "batch_complete",
    "QAExample",
    "load_dataset",
    "SpanMark",
    "build_span_answer",
    "convert_example",
    "mark_spans",
    "MetricReport",
    "alce_citation_pr",
    "alce_f1",
    "csca",
    "doc_f1",
    "lexical_judge",
    "rouge_l",
    "score_example",
    "sem_f1",
    "token_f1",
    "AggregateReport",
    "RunSpec",
    "convert_corpus",
    "emit_report",
    "run_matrix",
    "CoTMethod",
    "PromptBundle",
    "build_cot_prefix",
    "build_prompt",
    "select_fewshot",
    "split_response",
    "__version__",
]
