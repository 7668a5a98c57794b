"""Fewshot prompts, CoT attribution-guidance prefixes and response splitting.

Template text lives in ``templates/prompts_v1.json``; pass another file to
:func:`load_templates` to override it.  The guidance prefixes keep the
original spelling ("Lets analyze") so data formatted for existing finetuned
models stays compatible.
"""

from __future__ import annotations

import enum
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Protocol, Sequence

import numpy as np

from .citations import (
    AttributedAnswer,
    CitationLevel,
    CitedSpan,
    Passage,
    cited_content,
    cited_indices,
    collapse_ws,
    sentence_units,
    serialize,
)
from .errors import IndexOutOfRange, LevelMismatch, PoolTooSmall, UnresolvableCitation
from .labeling import build_span_answer, mark_spans

ANSWER_MARKER = "Thus, the final answer is:"
DEFAULT_K = 4


class CoTMethod(str, enum.Enum):
    NONE = "none"
    SPAN = "span"
    SENTENCE = "sentence"
    PASSAGE = "passage"

    @classmethod
    def coerce(cls, value: "CoTMethod | str | None") -> "CoTMethod":
        if value is None:
            return cls.NONE
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().rstrip(".")
        aliases = {"sent": "sentence", "pass": "passage", "": "none", "no": "none"}
        return cls(aliases.get(key, key))

    @property
    def short(self) -> str:
        return {"none": "None", "span": "Span", "sentence": "Sent.", "passage": "Pass."}[self.value]


# --------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class Templates:
    data: dict[str, Any]
    source: str = "builtin:prompts_v1.json"

    @property
    def version(self) -> int:
        return int(self.data.get("version", 1))

    def instruction(self, level: CitationLevel) -> str:
        return self.data["instructions"][level.value]

    def answer_label(self, level: CitationLevel) -> str:
        return self.data["answer_labels"][level.value]

    @property
    def cot(self) -> dict[str, Any]:
        return self.data["cot"]

    @property
    def marker(self) -> str:
        return self.cot["marker"]


_REQUIRED_KEYS = ("instructions", "fewshot_intro", "question_label", "passage_format", "answer_labels", "cot")


def load_templates(path: str | Path | None = None) -> Templates:
    if path is None:
        text = resources.files("attribqa").joinpath("templates/prompts_v1.json").read_text(encoding="utf-8")
        source = "builtin:prompts_v1.json"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    data = json.loads(text)
    missing = [k for k in _REQUIRED_KEYS if k not in data]
    if missing:
        raise ValueError(f"template file {source} lacks keys {missing}")
    return Templates(data, source)


_DEFAULT_TEMPLATES: Templates | None = None


def default_templates() -> Templates:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_templates()
    return _DEFAULT_TEMPLATES


# --------------------------------------------------------------------------
# CoT prefixes


def _resolve(gold: AttributedAnswer, passages: Sequence[Passage]) -> list[int]:
    cited = sorted(cited_indices(gold))
    if not cited:
        raise UnresolvableCitation("gold answer cites no passage")
    try:
        cited_content(gold, passages)
    except IndexOutOfRange as exc:
        raise UnresolvableCitation(str(exc)) from exc
    return cited


def _units_by_passage(gold: AttributedAnswer) -> dict[int, list[str]]:
    out: dict[int, list[str]] = {}
    for text, cits in sentence_units(gold):
        text = collapse_ws(text)
        for c in cits:
            if text not in out.setdefault(c, []):
                out[c].append(text)
    return out


def _spans_by_passage(gold: AttributedAnswer, passages: Sequence[Passage]) -> dict[int, list[str]]:
    out: dict[int, list[str]] = {}
    if gold.level is CitationLevel.SPAN:
        for seg in gold.segments:
            if isinstance(seg, CitedSpan) and seg.text not in out.setdefault(seg.passage_index, []):
                out[seg.passage_index].append(seg.text)
        return out
    # coarser gold: mine verbatim spans of each cited passage from the sentences citing it
    by_index = {p.index: p for p in passages}
    for idx, texts in _units_by_passage(gold).items():
        spans: list[str] = []
        for text in texts:
            marked = build_span_answer(text, mark_spans(text, [by_index[idx]])).spans
            spans.extend(s.text for s in marked if s.text not in spans)
        out[idx] = spans or texts
    return out


def build_cot_prefix(
    gold: AttributedAnswer,
    passages: Sequence[Passage],
    method: CoTMethod | str,
    templates: Templates | None = None,
) -> str:
    """Render the attribution-guidance prefix for ``gold``, ending with the answer marker."""
    method = CoTMethod.coerce(method)
    if method is CoTMethod.NONE:
        raise ValueError("method NONE has no prefix")
    t = (templates or default_templates()).cot
    cited = _resolve(gold, passages)
    lines = [t[method.value]["header"]]
    if method is CoTMethod.PASSAGE:
        lines.append(t["passage"]["line"].format(indices=", ".join(map(str, cited))))
    elif method is CoTMethod.SENTENCE:
        units = _units_by_passage(gold)
        for idx in cited:
            lines.append(t["sentence"]["line"].format(index=idx, content=" ".join(units.get(idx, []))))
    else:
        spans = _spans_by_passage(gold, passages)
        for idx in cited:
            lines.append(t["span"]["line"].format(index=idx))
            lines.extend(t["span"]["bullet"].format(span=s) for s in spans.get(idx, []))
    lines.append(t["marker"])
    return "\n".join(lines)


def split_response(raw: str, marker: str = ANSWER_MARKER) -> tuple[str | None, str]:
    """Split at the last answer marker into ``(reasoning, answer)``.

    The marker matches case-sensitively, but any whitespace run inside it
    matches any other.
    """
    pattern = r"\s+".join(map(re.escape, marker.split()))
    last = None
    for last in re.finditer(pattern, raw):
        pass
    if last is None:
        return None, raw.strip()
    return raw[: last.start()].strip(), raw[last.end() :].strip()


# --------------------------------------------------------------------------
# fewshot selection


class SimilarityScorer(Protocol):
    def score(self, query: str, candidate: str) -> float: ...


_WORD_RE = re.compile(r"\w+")


def _words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class TfidfScorer:
    """Cosine similarity of TF-IDF vectors over lowercased word unigrams.

    Document frequencies come from the fitted corpus; idf is the smoothed
    ``ln((1 + N) / (1 + df)) + 1``.
    """

    def __init__(self, corpus: Sequence[str] = ()):
        self.n_docs = len(corpus)
        self._vectors: dict[str, dict[str, float]] = {}
        self.df: Counter[str] = Counter()
        for doc in corpus:
            self.df.update(set(_words(doc)))

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.df.get(term, 0))) + 1

    def vector(self, text: str) -> dict[str, float]:
        vec = self._vectors.get(text)
        if vec is None:
            tf = Counter(_words(text))
            vec = self._vectors[text] = {w: c * self.idf(w) for w, c in tf.items()}
        return vec

    def score(self, query: str, candidate: str) -> float:
        return self.rank(query, [candidate])[0]

    def rank(self, query: str, candidates: Sequence[str]) -> np.ndarray:
        """Cosine of ``query`` against every candidate, as one array."""
        vecs = [self.vector(c) for c in candidates]
        q = self.vector(query)
        vocab = {w: i for i, w in enumerate(sorted(set(q).union(*vecs)))}
        mat = np.zeros((len(vecs), len(vocab)))
        for row, v in enumerate(vecs):
            for w, x in v.items():
                mat[row, vocab[w]] = x
        qv = np.zeros(len(vocab))
        for w, x in q.items():
            qv[vocab[w]] = x
        norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(qv)
        dots = mat @ qv
        return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)


def select_fewshot(question: str, pool: Sequence, k: int = DEFAULT_K, scorer: SimilarityScorer | None = None) -> list:
    """The ``k`` pool examples most similar to ``question``, most similar first.

    Ties keep pool order.  Without a scorer, a :class:`TfidfScorer` is fitted
    on the pool questions.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(pool):
        raise PoolTooSmall(f"requested {k} fewshots from a pool of {len(pool)}")
    if k == 0:
        return []
    questions = [ex.question for ex in pool]
    if scorer is None:
        scorer = TfidfScorer(questions)
    if isinstance(scorer, TfidfScorer):
        scores = [float(s) for s in scorer.rank(question, questions)]
    else:
        scores = [float(scorer.score(question, q)) for q in questions]
    order = sorted(range(len(pool)), key=lambda i: -scores[i])
    return [pool[i] for i in order[:k]]


# --------------------------------------------------------------------------
# prompt assembly


@dataclass
class PromptBundle:
    instruction: str
    fewshots: list[str]
    query_block: str
    level: CitationLevel
    method: CoTMethod
    answer_prefix_marker: str = ANSWER_MARKER
    fewshot_intro: str = "Here are some examples:"
    separator: str = "\n\n"
    meta: dict[str, Any] = field(default_factory=dict)

    def render(self) -> str:
        head = self.instruction
        if self.fewshots:
            head = f"{head} {self.fewshot_intro}"
        return self.separator.join([head, *self.fewshots, self.query_block])

    def messages(self) -> list[dict[str, str]]:
        return [{"role": "user", "content": self.render()}]


def render_passages(passages: Sequence[Passage], templates: Templates | None = None) -> str:
    t = (templates or default_templates()).data
    lines = []
    for i, p in enumerate(passages, 1):
        if p.index != i:
            raise ValueError(f"passages must be numbered 1..N, found {p.index} at position {i}")
        fmt = t["passage_format"] if p.title else t.get("passage_format_untitled", "[{index}] {text}")
        lines.append(fmt.format(index=i, title=p.title, text=collapse_ws(p.text)))
    return "\n".join(lines)


def _question_block(question: str, passages: Sequence[Passage], level: CitationLevel, t: Templates) -> str:
    return "\n".join(
        [f"{t.data['question_label']} {collapse_ws(question)}", render_passages(passages, t), t.answer_label(level)]
    )


def render_target(example, method: CoTMethod | str, templates: Templates | None = None) -> str:
    """Model-side text for an example: optional CoT prefix, then the serialized gold."""
    method = CoTMethod.coerce(method)
    answer = serialize(example.gold)
    if method is CoTMethod.NONE:
        return answer
    return f"{build_cot_prefix(example.gold, example.passages, method, templates)} {answer}"


def build_prompt(
    question: str,
    passages: Sequence[Passage],
    fewshots: Sequence,
    level: CitationLevel | str,
    method: CoTMethod | str = CoTMethod.NONE,
    templates: Templates | None = None,
) -> PromptBundle:
    """Assemble instruction, rendered fewshots and the open query block.

    Fewshots are rendered in the order given.  With a CoT method, each fewshot
    answer is preceded by its guidance prefix.
    """
    level = CitationLevel.coerce(level)
    method = CoTMethod.coerce(method)
    t = templates or default_templates()
    blocks = []
    for ex in fewshots:
        if ex.gold.level is not level:
            raise LevelMismatch(f"fewshot {ex.id!r} is {ex.gold.level.value}, prompt is {level.value}")
        block = _question_block(ex.question, ex.passages, level, t)
        blocks.append(f"{block} {render_target(ex, method, t)}")
    return PromptBundle(
        instruction=t.instruction(level),
        fewshots=blocks,
        query_block=_question_block(question, passages, level, t),
        level=level,
        method=method,
        answer_prefix_marker=t.marker,
        fewshot_intro=t.data["fewshot_intro"],
        separator=t.data.get("block_separator", "\n\n"),
        meta={"templates": t.source, "template_version": t.version, "fewshot_ids": [ex.id for ex in fewshots]},
    )


__all__ = [
    "ANSWER_MARKER",
    "CoTMethod",
    "Templates",
    "load_templates",
    "default_templates",
    "build_cot_prefix",
    "split_response",
    "SimilarityScorer",
    "TfidfScorer",
    "select_fewshot",
    "PromptBundle",
    "render_passages",
    "render_target",
    "build_prompt",
]
