"""Citation markup for attributed answers.

Three grammars, one per :class:`CitationLevel`::

    span       " [ 1 Johnny Panic and the Bible of Dreams ] " [ 1 is a song ... ] .
    sentence   ... by the British band Tears for Fears [1]. They also have ... [5].
    passage    ... "Head over Heels", and "I Believe" [1][5].

An :class:`AttributedAnswer` is always held in canonical form: whitespace runs are
collapsed, span markup is separated from its neighbours by one space, and
sentence/passage texts carry no space before their final punctuation.  The
canonical form is what :func:`serialize` emits, so for every answer ``a``
``parse(serialize(a), a.level) == a``.

Parsing is lenient by default: anything that is not valid markup stays plain
text.  ``strict=True`` turns malformed markup into :class:`StrictParseError`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import (
    EmptyInputError,
    IndexOutOfRange,
    InvariantViolation,
    LevelMismatch,
    StrictParseError,
)

__all__ = [
    "CitationLevel",
    "PlainText",
    "CitedSpan",
    "CitedSentence",
    "TerminalCitationBlock",
    "Segment",
    "AttributedAnswer",
    "Passage",
    "parse_answer",
    "serialize",
    "canonicalize",
    "strip_citations",
    "cited_indices",
    "cited_content",
    "sentence_units",
    "sentence_spans",
    "convert_level",
    "collapse_ws",
]


class CitationLevel(str, enum.Enum):
    SPAN = "span"
    SENTENCE = "sentence"
    PASSAGE = "passage"

    @classmethod
    def coerce(cls, value: "CitationLevel | str") -> "CitationLevel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().rstrip(".")
        aliases = {"sent": "sentence", "pass": "passage", "psg": "passage"}
        return cls(aliases.get(key, key))

    @property
    def short(self) -> str:
        """Row label used in report tables."""
        return {"span": "Span", "sentence": "Sent.", "passage": "Pass."}[self.value]


@dataclass(frozen=True)
class PlainText:
    text: str


@dataclass(frozen=True)
class CitedSpan:
    passage_index: int
    text: str


@dataclass(frozen=True)
class CitedSentence:
    text: str
    citations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "citations", _citation_tuple(self.citations))


@dataclass(frozen=True)
class TerminalCitationBlock:
    citations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "citations", _citation_tuple(self.citations))


Segment = Union[PlainText, CitedSpan, CitedSentence, TerminalCitationBlock]


@dataclass(frozen=True)
class Passage:
    index: int
    text: str
    title: str | None = None

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 1:
            raise InvariantViolation(f"passage index must be a positive int, got {self.index!r}")
        if not self.text or not self.text.strip():
            raise InvariantViolation(f"passage {self.index} has empty text")


def _citation_tuple(citations: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for c in citations:
        if isinstance(c, bool) or not isinstance(c, int) or c < 1:
            raise InvariantViolation(f"citation indices are 1-based ints, got {c!r}")
        if c not in out:
            out.append(c)
    if not out:
        raise InvariantViolation("citation list must be non-empty")
    return tuple(out)


# --------------------------------------------------------------------------
# lexical helpers

_WS_RE = re.compile(r"\s+")
_SPAN_RE = re.compile(r"\[\s+(\d+)\s+([^\[\]]*?)\s*\]")
_MARKER = r"\[\s*0*[1-9]\d*(?:\s*,\s*0*[1-9]\d*)*\s*\]"
_MARKER_RE = re.compile(_MARKER)
_MARKER_GROUP_RE = re.compile(rf"\s*(?:{_MARKER}\s*)*{_MARKER}")
# a trailing run like " ? !" counts as one final punctuation group
_FINAL_PUNCT_RE = re.compile(r"\s*([.?!]+(?:\s+[.?!]+)*)$")
_BARE_PUNCT_RE = re.compile(r"[\s.?!]+")
_TERMINAL_RE = re.compile(r"[.?!]+[\"'”’)]*(?=\s|$)")
_ABBREV_WORD_RE = re.compile(r"([A-Za-z]+(?:\.[A-Za-z]+)*)$")
_CHAIN_RE = re.compile(r"[A-Za-z]\.(?:\s+[A-Za-z]\.)*\s+[A-Z][a-z]")
_PREV_INITIAL_RE = re.compile(r"(?:^|\s)[A-Za-z]\.\s+$")
# marker removal glues to what follows only when that is punctuation or a gap
_GLUE_CHARS = set(".,;:?!)\"'”’")

ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof sr jr st mt vs etc inc ltd co corp no nos fig figs al approx "
    "dept est vol vols jan feb mar apr jun jul aug sep sept oct nov dec".split()
)


def collapse_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _final_punct(m: re.Match) -> str:
    return _WS_RE.sub("", m.group(1))


def _tidy_sentence(text: str) -> str:
    return _FINAL_PUNCT_RE.sub(_final_punct, collapse_ws(text))


def _guarded(text: str, match: re.Match) -> bool:
    if match.group() != ".":
        return False
    word = _ABBREV_WORD_RE.search(text, 0, match.start())
    if word is None or word.end() != match.start():
        return False
    w = word.group(1)
    if w.lower() in ABBREVIATIONS or "." in w:
        return True
    if len(w) != 1:
        return False
    # a lone letter is an initial only inside a chain such as "J. K. Rowling"
    chain = _CHAIN_RE.match(text, word.start())
    if chain is None:
        return False
    return chain.group().count(".") >= 2 or bool(_PREV_INITIAL_RE.search(text, 0, word.start()))


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Half-open ``(start, end)`` offsets of the sentences in ``text``.

    A sentence ends at a run of ``.?!`` (plus closing quotes/parens) followed by
    whitespace or the end of text, unless the period closes an abbreviation or
    an initial.
    """
    spans = []
    start = 0
    for m in _TERMINAL_RE.finditer(text):
        if _guarded(text, m):
            continue
        _push_span(text, start, m.end(), spans)
        start = m.end()
    _push_span(text, start, len(text), spans)
    return spans


def _push_span(text: str, start: int, end: int, spans: list) -> None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start < end:
        spans.append((start, end))


def _ends_at_boundary(text: str) -> bool:
    return any(m.end() == len(text) and not _guarded(text, m) for m in _TERMINAL_RE.finditer(text))


# --------------------------------------------------------------------------
# canonical form

def _valid_span(m: re.Match) -> bool:
    return int(m.group(1)) >= 1 and bool(m.group(2).strip())


def _canonical(level: CitationLevel, segments: Sequence[Segment]) -> tuple[Segment, ...]:
    if level is CitationLevel.SPAN:
        return _canonical_span(segments)
    if level is CitationLevel.SENTENCE:
        out = []
        for seg in segments:
            if isinstance(seg, PlainText):
                text = _tidy_sentence(seg.text)
                if text:
                    out.append(PlainText(text))
            elif isinstance(seg, CitedSentence):
                out.append(CitedSentence(_tidy_sentence(seg.text), seg.citations))
            else:
                raise InvariantViolation(f"{type(seg).__name__} not allowed at sentence level")
        return tuple(out)
    plain = []
    blocks = []
    for seg in segments:
        if isinstance(seg, PlainText):
            if blocks:
                raise InvariantViolation("passage-level text after the citation block")
            plain.append(seg.text)
        elif isinstance(seg, TerminalCitationBlock):
            blocks.append(seg)
        else:
            raise InvariantViolation(f"{type(seg).__name__} not allowed at passage level")
    if len(blocks) > 1:
        raise InvariantViolation("at most one terminal citation block")
    text = _tidy_sentence("".join(plain))
    return tuple(([PlainText(text)] if text else []) + blocks)


def _canonical_span(segments: Sequence[Segment]) -> tuple[Segment, ...]:
    merged: list[Segment] = []
    for seg in segments:
        if isinstance(seg, PlainText):
            if merged and isinstance(merged[-1], PlainText):
                merged[-1] = PlainText(merged[-1].text + seg.text)
            else:
                merged.append(PlainText(seg.text))
        elif isinstance(seg, CitedSpan):
            merged.append(CitedSpan(seg.passage_index, collapse_ws(seg.text)))
        else:
            raise InvariantViolation(f"{type(seg).__name__} not allowed at span level")
    out: list[Segment] = []
    for i, seg in enumerate(merged):
        if isinstance(seg, CitedSpan):
            if out and isinstance(out[-1], CitedSpan):
                out.append(PlainText(" "))
            out.append(seg)
            continue
        text = _WS_RE.sub(" ", seg.text)
        prev_span = i > 0
        next_span = i < len(merged) - 1
        text = (" " + text.lstrip()) if prev_span else text.lstrip()
        text = (text.rstrip() + " ") if next_span else text.rstrip()
        if text:
            out.append(PlainText(text))
    return tuple(out)


def _validate(level: CitationLevel, segments: tuple[Segment, ...]) -> None:
    if level is CitationLevel.SPAN:
        for seg in segments:
            if isinstance(seg, CitedSpan):
                if not isinstance(seg.passage_index, int) or seg.passage_index < 1:
                    raise InvariantViolation(f"bad span index {seg.passage_index!r}")
                if not seg.text:
                    raise InvariantViolation("cited span text is empty")
                if "[" in seg.text or "]" in seg.text:
                    raise InvariantViolation(f"cited span contains a bracket: {seg.text!r}")
            elif any(_valid_span(m) for m in _SPAN_RE.finditer(seg.text)):
                raise InvariantViolation(f"plain text contains span markup: {seg.text!r}")
        return
    for i, seg in enumerate(segments):
        if isinstance(seg, TerminalCitationBlock):
            continue
        if _MARKER_RE.search(seg.text):
            raise InvariantViolation(f"text contains a citation marker: {seg.text!r}")
        if level is CitationLevel.SENTENCE:
            if not seg.text:
                raise InvariantViolation("cited sentence text is empty")
            if _bare_punct(seg.text) and len(segments) > 1:
                raise InvariantViolation(f"punctuation-only sentence: {seg.text!r}")
            if len(sentence_spans(seg.text)) != 1:
                raise InvariantViolation(f"segment is not a single sentence: {seg.text!r}")
            if i < len(segments) - 1 and not _ends_at_boundary(seg.text):
                raise InvariantViolation(f"non-final sentence lacks terminal punctuation: {seg.text!r}")


@dataclass(frozen=True)
class AttributedAnswer:
    """A cited answer; segments are canonicalized and validated on construction."""

    level: CitationLevel
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        level = CitationLevel.coerce(self.level)
        segments = _canonical(level, tuple(self.segments))
        _validate(level, segments)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "segments", segments)

    @property
    def spans(self) -> list[CitedSpan]:
        return [s for s in self.segments if isinstance(s, CitedSpan)]

    def __str__(self) -> str:
        return serialize(self)


# --------------------------------------------------------------------------
# parsing

def parse_answer(raw: str, level: CitationLevel | str, *, strict: bool = False) -> AttributedAnswer:
    """Parse model output or dataset text into an :class:`AttributedAnswer`."""
    if raw is None or not raw.strip():
        raise EmptyInputError("answer text is empty")
    level = CitationLevel.coerce(level)
    if level is CitationLevel.SPAN:
        return AttributedAnswer(level, _parse_span(raw, strict))
    if strict:
        _check_markers_strict(raw)
    plain, markers = _extract_markers(raw)
    if level is CitationLevel.PASSAGE:
        cits = [c for _, cs in markers for c in cs]
        segs: list[Segment] = [PlainText(plain)]
        if cits:
            segs.append(TerminalCitationBlock(cits))
        return AttributedAnswer(level, segs)
    spans = sentence_spans(plain)
    if not spans:
        if strict and markers:
            raise StrictParseError("orphan_citation", 0, raw)
        return AttributedAnswer(level, ())
    groups: list[tuple[str, list[int]]] = [(plain[s:e], []) for s, e in spans]
    for offset, cits in markers:
        k = next((i for i, (_, e) in enumerate(spans) if offset <= e), len(spans) - 1)
        groups[k][1].extend(cits)
    try:
        return AttributedAnswer(level, _assemble_sentences(groups))
    except InvariantViolation:
        if strict:
            raise
    # Bracket halves joined across a sentence merge; fall back to bracket-free text.
    safe = plain.replace("[", "(").replace("]", ")")
    groups = [(safe[s:e], []) for s, e in sentence_spans(safe)]
    groups[-1][1].extend(c for _, cs in markers for c in cs)
    return AttributedAnswer(level, _assemble_sentences(groups))


def _assemble_sentences(groups: Sequence[tuple[str, Sequence[int]]]) -> list[Segment]:
    """Turn (text, citations) sentence groups into valid sentence segments.

    Tidying can remove a boundary (``"Dr ."`` becomes ``"Dr."``); such a
    sentence is merged with its successor so the result always validates.
    """
    pending = [(_tidy_sentence(t), list(c)) for t, c in groups]
    pending = _absorb_bare_punct([(t, c) for t, c in pending if t or c])
    out: list[tuple[str, list[int]]] = []
    for text, cits in pending:
        if out and not _ends_at_boundary(out[-1][0]):
            prev_text, prev_cits = out.pop()
            text = collapse_ws(prev_text + " " + text)
            cits = prev_cits + cits
        elif not text and out:
            out[-1][1].extend(cits)
            continue
        out.append((text, cits))
    segs: list[Segment] = []
    for text, cits in out:
        if not text:
            continue
        segs.append(CitedSentence(text, cits) if cits else PlainText(text))
    return segs


def _bare_punct(text: str) -> bool:
    return bool(text) and not _BARE_PUNCT_RE.sub("", text)


def _absorb_bare_punct(groups: list[tuple[str, list[int]]]) -> list[tuple[str, list[int]]]:
    # a unit like "." has no words: fold it into the previous sentence, or
    # drop a leading one and hand its citations to the next sentence
    out: list[tuple[str, list[int]]] = []
    carry: tuple[str, list[int]] | None = None
    for text, cits in groups:
        if carry is not None:
            cits = carry[1] + cits
            carry = None
        if _bare_punct(text):
            if out:
                prev_text, prev_cits = out.pop()
                out.append((_tidy_sentence(prev_text + " " + text), prev_cits + cits))
            else:
                carry = (text, cits)
            continue
        out.append((text, cits))
    if carry is not None:
        out.append(carry)
    return out


def _extract_once(raw: str):
    pieces = []
    markers = []
    edits = []
    pos = 0
    out_len = 0
    for m in _MARKER_GROUP_RE.finditer(raw):
        pieces.append(raw[pos : m.start()])
        out_len += m.start() - pos
        nxt = raw[m.end() : m.end() + 1]
        repl = "" if (not nxt or nxt.isspace() or nxt in _GLUE_CHARS) else " "
        markers.append((out_len, [int(x) for x in re.findall(r"\d+", m.group())]))
        edits.append((m.start(), m.end(), len(repl)))
        pieces.append(repl)
        out_len += len(repl)
        pos = m.end()
    pieces.append(raw[pos:])
    return "".join(pieces), markers, edits


def _extract_markers(raw: str) -> tuple[str, list[tuple[int, list[int]]]]:
    """Remove citation markers, returning the plain text and each marker's offset in it.

    Removal repeats until no marker is left, since deleting one marker can
    bring two bracket halves together (``[[1]2]``).
    """
    plain, markers, _ = _extract_once(raw)
    while _MARKER_RE.search(plain):
        plain, more, edits = _extract_once(plain)

        def remap(o: int) -> int:
            shift = 0
            for start, end, keep in edits:
                if end <= o:
                    shift += end - start - keep
                elif start < o:
                    return start - shift
            return o - shift

        markers = sorted([(remap(o), c) for o, c in markers] + more, key=lambda x: x[0])
    return plain, markers


def _classify_bracket(raw: str, i: int) -> str:
    if raw[i] == "]":
        return "stray_bracket"
    close = raw.find("]", i + 1)
    if close < 0:
        return "unclosed"
    inner = raw[i + 1 : close]
    if "[" in inner:
        return "nested"
    toks = inner.replace(",", " ").split()
    if not toks:
        return "empty_span"
    if not toks[0].isdigit():
        return "non_integer"
    if int(toks[0]) == 0:
        return "bad_index"
    return "empty_span" if len(toks) == 1 else "stray_bracket"


def _check_markers_strict(raw: str) -> None:
    covered = _covered(_MARKER_GROUP_RE.finditer(raw))
    for i, ch in enumerate(raw):
        if ch in "[]" and i not in covered:
            raise StrictParseError(_classify_bracket(raw, i), i, raw)


def _covered(matches) -> set[int]:
    out: set[int] = set()
    for m in matches:
        out.update(range(m.start(), m.end()))
    return out


def _parse_span(raw: str, strict: bool) -> list[Segment]:
    segs: list[Segment] = []
    valid = []
    pos = 0
    for m in _SPAN_RE.finditer(raw):
        if not _valid_span(m):
            if strict:
                kind = "empty_span" if not m.group(2).strip() else "bad_index"
                raise StrictParseError(kind, m.start(), raw)
            continue
        idx = int(m.group(1))
        text = collapse_ws(m.group(2))
        valid.append(m)
        if m.start() > pos:
            segs.append(PlainText(raw[pos : m.start()]))
        segs.append(CitedSpan(idx, text))
        pos = m.end()
    if pos < len(raw):
        segs.append(PlainText(raw[pos:]))
    if strict:
        covered = _covered(valid) | _covered(_MARKER_RE.finditer(raw))
        for i, ch in enumerate(raw):
            if ch in "[]" and i not in covered:
                raise StrictParseError(_classify_bracket(raw, i), i, raw)
    return segs


# --------------------------------------------------------------------------
# emitting and views

def _markers(citations: Iterable[int]) -> str:
    return "".join(f"[{c}]" for c in citations)


def _insert_before_final_punct(text: str, marker: str) -> str:
    m = _FINAL_PUNCT_RE.search(text)
    if m is None:
        return f"{text} {marker}" if text else marker
    head = text[: m.start()]
    punct = _final_punct(m)
    return f"{head} {marker}{punct}" if head else f"{marker}{punct}"


def serialize(answer: AttributedAnswer) -> str:
    """Emit the canonical text form of ``answer``."""
    if answer.level is CitationLevel.SPAN:
        parts = [
            f"[ {s.passage_index} {s.text} ]" if isinstance(s, CitedSpan) else s.text
            for s in answer.segments
        ]
        return "".join(parts)
    if answer.level is CitationLevel.SENTENCE:
        parts = [
            _insert_before_final_punct(s.text, _markers(s.citations))
            if isinstance(s, CitedSentence)
            else s.text
            for s in answer.segments
        ]
        return " ".join(parts)
    text = next((s.text for s in answer.segments if isinstance(s, PlainText)), "")
    block = next((s for s in answer.segments if isinstance(s, TerminalCitationBlock)), None)
    if block is None:
        return text
    return _insert_before_final_punct(text, _markers(block.citations))


def canonicalize(raw: str, level: CitationLevel | str) -> str:
    return serialize(parse_answer(raw, level))


def strip_citations(answer: AttributedAnswer) -> str:
    """Answer text with all citation markup removed."""
    if answer.level is CitationLevel.SPAN:
        return collapse_ws("".join(s.text for s in answer.segments))
    return collapse_ws(" ".join(s.text for s in answer.segments if not isinstance(s, TerminalCitationBlock)))


def cited_indices(answer: AttributedAnswer) -> set[int]:
    out: set[int] = set()
    for seg in answer.segments:
        if isinstance(seg, CitedSpan):
            out.add(seg.passage_index)
        elif isinstance(seg, (CitedSentence, TerminalCitationBlock)):
            out.update(seg.citations)
    return out


def _check_range(indices: Iterable[int], passages: Sequence[Passage] | None) -> None:
    if passages is None:
        return
    n = len(passages)
    for i in sorted(indices):
        if i > n:
            raise IndexOutOfRange(i, n)


def cited_content(
    answer: AttributedAnswer, passages: Sequence[Passage] | None = None
) -> dict[int, list[str]]:
    """Map each cited passage index to the answer text attributed to it.

    Span level groups span texts; sentence level groups the cited sentences
    (final punctuation dropped); passage level assigns the whole stripped answer
    to every cited passage.  With ``passages`` given, citations beyond the
    passage count raise :class:`IndexOutOfRange`.
    """
    _check_range(cited_indices(answer), passages)
    content: dict[int, list[str]] = {}
    if answer.level is CitationLevel.PASSAGE:
        whole = strip_citations(answer)
        for seg in answer.segments:
            if isinstance(seg, TerminalCitationBlock):
                for c in seg.citations:
                    content[c] = [whole]
        return content
    for seg in answer.segments:
        if isinstance(seg, CitedSpan):
            content.setdefault(seg.passage_index, []).append(seg.text)
        elif isinstance(seg, CitedSentence):
            text = _FINAL_PUNCT_RE.sub("", seg.text).strip()
            for c in seg.citations:
                content.setdefault(c, []).append(text)
    return content


def sentence_units(answer: AttributedAnswer) -> list[tuple[str, tuple[int, ...]]]:
    """Sentence-sized statements with the citations each one carries.

    Span answers are lifted to sentences: a sentence of the stripped text
    inherits the passage index of every span that overlaps it.  Passage
    answers give each sentence the whole terminal citation block.
    """
    if answer.level is CitationLevel.SENTENCE:
        return [
            (s.text, s.citations if isinstance(s, CitedSentence) else ())
            for s in answer.segments
        ]
    if answer.level is CitationLevel.PASSAGE:
        text = strip_citations(answer)
        block = next((s.citations for s in answer.segments if isinstance(s, TerminalCitationBlock)), ())
        return [(text[s:e], block) for s, e in sentence_spans(text)]
    pieces = []
    span_ranges = []
    offset = 0
    for seg in answer.segments:
        if isinstance(seg, CitedSpan):
            span_ranges.append((offset, offset + len(seg.text), seg.passage_index))
        pieces.append(seg.text)
        offset += len(seg.text)
    text = "".join(pieces)
    units = []
    for s, e in sentence_spans(text):
        cits: list[int] = []
        for a, b, idx in span_ranges:
            if a < e and s < b and idx not in cits:
                cits.append(idx)
        units.append((text[s:e], tuple(cits)))
    return units


def convert_level(answer: AttributedAnswer, level: CitationLevel | str) -> AttributedAnswer:
    """Coarsen an answer: span -> sentence -> passage.  Refining is impossible."""
    level = CitationLevel.coerce(level)
    order = [CitationLevel.SPAN, CitationLevel.SENTENCE, CitationLevel.PASSAGE]
    if order.index(level) < order.index(answer.level):
        raise LevelMismatch(f"cannot refine a {answer.level.value} answer to {level.value}")
    if level is answer.level:
        return answer
    if answer.level is CitationLevel.SPAN:
        units = sentence_units(answer)
        answer = AttributedAnswer(
            CitationLevel.SENTENCE, _assemble_sentences([(t, sorted(c)) for t, c in units])
        )
        if level is CitationLevel.SENTENCE:
            return answer
    segs: list[Segment] = [PlainText(strip_citations(answer))]
    cits = sorted(cited_indices(answer))
    if cits:
        segs.append(TerminalCitationBlock(cits))
    return AttributedAnswer(CitationLevel.PASSAGE, segs)
