"""Span-attribution labels mined from passage-labeled answers.

Given an answer and the passages it draws from, every maximal common
substring that touches a named entity becomes a candidate; candidates pooled
across passages are taken longest first and marked in the answer unless any
of their characters is already marked.  The surviving marks are rendered in
the span grammar of :mod:`attribqa.citations`.

All offsets refer to the whitespace-canonical answer (``collapse_ws``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

from .citations import (
    AttributedAnswer,
    CitationLevel,
    CitedSpan,
    Passage,
    PlainText,
    collapse_ws,
)
from .errors import MarkOutOfBounds, OverlappingMarks

if TYPE_CHECKING:
    from .dataset import QAExample

DEFAULT_MIN_LEN = 10
DEFAULT_LOW_COVERAGE = 0.1


@dataclass(frozen=True, order=True)
class SpanMark:
    start: int
    end: int
    passage_index: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise MarkOutOfBounds(f"bad mark range [{self.start}, {self.end})")


@dataclass(frozen=True)
class CommonSubstring:
    text: str
    passage_index: int
    answer_positions: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    label: str = "ENTITY"


class EntityRecognizer(Protocol):
    def recognize(self, text: str) -> list[EntitySpan]: ...


# --------------------------------------------------------------------------
# common substrings

def _reach(answer: str, passage: str) -> list[int]:
    """``reach[s]`` is the largest ``e`` with ``answer[s:e]`` inside ``passage``.

    ``reach`` is non-decreasing, so one forward pointer suffices and the loop
    does O(n) substring tests.
    """
    reach = [0] * len(answer)
    e = 0
    for s in range(len(answer)):
        e = max(e, s)
        while e < len(answer) and answer[s : e + 1] in passage:
            e += 1
        reach[s] = e
    return reach


def _occurrences(text: str, needle: str) -> tuple[int, ...]:
    out = []
    i = text.find(needle)
    while i >= 0:
        out.append(i)
        i = text.find(needle, i + 1)
    return tuple(out)


def common_substrings(answer: str, passage: Passage, min_len: int = DEFAULT_MIN_LEN) -> list[CommonSubstring]:
    """Maximal common substrings of ``answer`` and ``passage`` of length >= ``min_len``.

    A substring of the answer is maximal when it occurs in the passage but
    neither its one-character left nor right extension does.  Edge whitespace
    is trimmed before the length test, since a span never starts or ends with
    a space.  Each result lists every offset at which its text occurs in the
    answer, in order of first occurrence.
    """
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    a = collapse_ws(answer)
    p = collapse_ws(passage.text)
    reach = _reach(a, p)
    texts: dict[str, None] = {}
    for s, e in enumerate(reach):
        if s == 0 or reach[s - 1] < e:
            text = a[s:e].strip()
            if len(text) >= min_len:
                texts.setdefault(text, None)
    return [CommonSubstring(t, passage.index, _occurrences(a, t)) for t in texts]


# --------------------------------------------------------------------------
# entity recognition

_TOKEN_RE = re.compile(r"\w+(?:['’.,\-]\w+)*")
_QUOTED_RE = re.compile(r"\"([^\"]+)\"|“([^”]+)”")
_YEAR_RE = re.compile(r"(?:1\d{3}|20\d{2})s?")
_SENTENCE_END = set(".?!")
_QUOTES = set("\"'“”‘’([")

# sentence-initial capitalized words that are not names
_FUNCTION_WORDS = frozenset(
    """a an the this that these those it its they them their there then he she his her
    we our you your i in on at of for from by with to and or but if when while as so
    also some many most all one other another each both what which who why how where
    however although because after before during since""".split()
)


class HeuristicEntityRecognizer:
    """Dependency-free stand-in for a neural NER.

    Rules, applied to word tokens:

    * maximal runs of capitalized tokens (``Tears``, ``Johnny Panic``); a
      sentence-initial token only counts when it is not a function word
    * tokens containing digits; four-digit years are labelled ``DATE``
    * phrases in double quotes, labelled ``TITLE``
    """

    max_title_words = 12

    def recognize(self, text: str) -> list[EntitySpan]:
        spans: set[EntitySpan] = set()
        run: list[re.Match] = []

        def flush():
            if run:
                spans.add(EntitySpan(run[0].start(), run[-1].end(), "PROPER"))
                run.clear()

        prev_end = 0
        for tok in _TOKEN_RE.finditer(text):
            word = tok.group()
            gap = text[prev_end : tok.start()]
            if run and gap != " ":
                flush()
            if any(ch.isdigit() for ch in word):
                flush()
                label = "DATE" if _YEAR_RE.fullmatch(word) else "CARDINAL"
                spans.add(EntitySpan(tok.start(), tok.end(), label))
            elif word[0].isupper():
                if not (_sentence_initial(text, tok.start()) and word.lower() in _FUNCTION_WORDS):
                    run.append(tok)
                else:
                    flush()
            else:
                flush()
            prev_end = tok.end()
        flush()
        for m in _QUOTED_RE.finditer(text):
            g = 1 if m.group(1) is not None else 2
            inner = m.group(g)
            lead = len(inner) - len(inner.lstrip())
            body = inner.strip()
            if body and len(body.split()) <= self.max_title_words:
                start = m.start(g) + lead
                spans.add(EntitySpan(start, start + len(body), "TITLE"))
        return sorted(spans, key=lambda s: (s.start, s.end, s.label))


def _sentence_initial(text: str, pos: int) -> bool:
    i = pos - 1
    while i >= 0 and (text[i].isspace() or text[i] in _QUOTES):
        i -= 1
    return i < 0 or text[i] in _SENTENCE_END


class AnnotatedEntityRecognizer:
    """Replays pre-computed entity annotations (e.g. from spaCy) stored with a dataset."""

    def __init__(self, entities: Iterable[EntitySpan]):
        self.entities = sorted(entities, key=lambda s: (s.start, s.end))

    def recognize(self, text: str) -> list[EntitySpan]:
        for ent in self.entities:
            if not 0 <= ent.start < ent.end <= len(text):
                raise MarkOutOfBounds(f"entity [{ent.start}, {ent.end}) outside text of length {len(text)}")
        return list(self.entities)


def builtin_entity_recognizer() -> HeuristicEntityRecognizer:
    return HeuristicEntityRecognizer()


# --------------------------------------------------------------------------
# marking

def _qualifies(start: int, end: int, entities: Sequence[EntitySpan], containment: bool) -> bool:
    if containment:
        return any(start <= e.start and e.end <= end for e in entities)
    return any(e.start < end and start < e.end for e in entities)


def mark_spans(
    answer: str,
    passages: Sequence[Passage],
    recognizer: EntityRecognizer | None = None,
    min_len: int = DEFAULT_MIN_LEN,
    *,
    containment: bool = False,
) -> list[SpanMark]:
    """Greedy longest-first marking of entity-bearing common substrings.

    Candidates from all passages are pooled and sorted by length (descending),
    ties broken by earlier answer offset, then lower passage index.  Each
    candidate is marked at its first occurrence with no character already
    marked; a candidate whose every occurrence is fully or partially marked
    is skipped.  An occurrence must overlap an entity to count, or contain one
    whole when ``containment`` is set.
    """
    a = collapse_ws(answer)
    recognizer = recognizer or HeuristicEntityRecognizer()
    entities = recognizer.recognize(a)
    candidates = []
    for passage in passages:
        for cs in common_substrings(a, passage, min_len):
            positions = [
                pos for pos in cs.answer_positions if _qualifies(pos, pos + cs.length, entities, containment)
            ]
            if positions:
                candidates.append((cs, positions))
    candidates.sort(key=lambda c: (-c[0].length, c[1][0], c[0].passage_index))
    marked = bytearray(len(a))
    marks = []
    for cs, positions in candidates:
        for pos in positions:
            end = pos + cs.length
            if not any(marked[pos:end]):
                marked[pos:end] = b"\x01" * cs.length
                marks.append(SpanMark(pos, end, cs.passage_index))
                break
    return sorted(marks)


def _check_marks(answer: str, marks: Sequence[SpanMark]) -> list[SpanMark]:
    ordered = sorted(marks)
    for m in ordered:
        if m.end > len(answer):
            raise MarkOutOfBounds(f"mark [{m.start}, {m.end}) beyond answer length {len(answer)}")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise OverlappingMarks(f"marks {prev} and {cur} overlap")
    return ordered


def build_span_answer(answer: str, marks: Sequence[SpanMark]) -> AttributedAnswer:
    """Render marked ranges of ``answer`` as cited spans.

    Edge whitespace is trimmed from each mark and brackets are cut out of it,
    so every cited span stays a verbatim substring of its passage.
    """
    a = collapse_ws(answer)
    segments = []
    pos = 0
    for m in _check_marks(a, marks):
        for piece in re.finditer(r"[^\[\]]+", a[m.start : m.end]):
            s = m.start + piece.start()
            e = m.start + piece.end()
            while s < e and a[s].isspace():
                s += 1
            while e > s and a[e - 1].isspace():
                e -= 1
            if s == e:
                continue
            if s > pos:
                segments.append(PlainText(a[pos:s]))
            segments.append(CitedSpan(m.passage_index, a[s:e]))
            pos = e
    if pos < len(a):
        segments.append(PlainText(a[pos:]))
    return AttributedAnswer(CitationLevel.SPAN, segments)


def coverage(answer: str, marks: Sequence[SpanMark]) -> float:
    a = collapse_ws(answer)
    return sum(m.end - m.start for m in marks) / len(a) if a else 0.0


def convert_example(
    question: str,
    passages: Sequence[Passage],
    plain_answer: str,
    gold_passage_citations: Iterable[int],
    recognizer: EntityRecognizer | None = None,
    min_len: int = DEFAULT_MIN_LEN,
    *,
    example_id: str = "",
    low_coverage_threshold: float = DEFAULT_LOW_COVERAGE,
    containment: bool = False,
) -> "QAExample":
    """Turn a passage-labeled answer into a span-labeled :class:`QAExample`.

    Only the passages in ``gold_passage_citations`` are mined.  ``meta`` of the
    result carries ``coverage`` (marked characters / answer characters) and
    ``low_coverage`` (no marks, or coverage below the threshold).
    """
    from .dataset import QAExample

    cited = set(gold_passage_citations)
    by_index = {p.index: p for p in passages}
    unknown = sorted(cited - set(by_index))
    if unknown:
        raise ValueError(f"gold citations {unknown} not among the {len(passages)} passages")
    sources = [by_index[i] for i in sorted(cited)]
    marks = mark_spans(plain_answer, sources, recognizer, min_len, containment=containment) if sources else []
    gold = build_span_answer(plain_answer, marks)
    cov = coverage(plain_answer, marks)
    return QAExample(
        id=example_id,
        question=question,
        passages=tuple(passages),
        gold=gold,
        meta={"coverage": cov, "low_coverage": (not marks) or cov < low_coverage_threshold},
    )
