"""JSONL dataset records.

One example per line::

    {"id": "q1",
     "question": "what is the title of tears for fears song?",
     "passages": [{"title": "...", "text": "..."}, ...],
     "answer": "<gold answer in the level's markup>",
     "entities": [{"start": 0, "end": 5, "label": "PERSON"}],     # optional
     "external_scores": {"BERT": 0.91},                          # optional
     "cited_passages": [1, 5]}                                   # optional, convert input only

Passages are numbered 1..N in list order.  See ``docs/schema.md``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .citations import AttributedAnswer, CitationLevel, Passage, cited_indices, parse_answer, serialize
from .errors import CitationFormatError, GoldParseError, SchemaViolation
from .labeling import EntitySpan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    passages: tuple[Passage, ...]
    gold: AttributedAnswer
    entities: tuple[EntitySpan, ...] | None = None
    external_scores: dict[str, float] | None = None
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "id": self.id,
            "question": self.question,
            "passages": [
                {"title": p.title, "text": p.text} if p.title is not None else {"text": p.text}
                for p in self.passages
            ],
            "answer": serialize(self.gold),
        }
        if self.entities is not None:
            rec["entities"] = [{"start": e.start, "end": e.end, "label": e.label} for e in self.entities]
        if self.external_scores:
            rec["external_scores"] = dict(self.external_scores)
        return rec


class LoadedDataset(list):
    """A list of :class:`QAExample` that also remembers skipped lines."""

    def __init__(self, examples: Iterable[QAExample] = (), skipped: Iterable[tuple[int, str]] = ()):
        super().__init__(examples)
        self.skipped: list[tuple[int, str]] = list(skipped)


def _decode(line: str, lineno: int) -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(lineno, "<json>", f"is not valid JSON ({exc.msg})") from exc


def iter_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for the non-blank lines of a JSONL file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                yield lineno, line


def read_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    for lineno, line in iter_lines(path):
        yield lineno, _decode(line, lineno)


def parse_passages(obj: Any, lineno: int) -> tuple[Passage, ...]:
    if not isinstance(obj, list) or not obj:
        raise SchemaViolation(lineno, "passages", "must be a non-empty list")
    out = []
    for i, p in enumerate(obj, 1):
        if isinstance(p, str):
            p = {"text": p}
        if not isinstance(p, dict) or not isinstance(p.get("text"), str) or not p["text"].strip():
            raise SchemaViolation(lineno, f"passages[{i - 1}].text", "must be a non-empty string")
        title = p.get("title")
        if title is not None and not isinstance(title, str):
            raise SchemaViolation(lineno, f"passages[{i - 1}].title", "must be a string")
        out.append(Passage(index=i, text=p["text"], title=title))
    return tuple(out)


def _entities(obj: Any, lineno: int) -> tuple[EntitySpan, ...] | None:
    if obj is None:
        return None
    try:
        return tuple(EntitySpan(int(e["start"]), int(e["end"]), str(e.get("label", "ENTITY"))) for e in obj)
    except (TypeError, KeyError, ValueError) as exc:
        raise SchemaViolation(lineno, "entities", "must be a list of {start, end, label}") from exc


def _require_str(rec: dict, key: str, lineno: int) -> str:
    val = rec.get(key)
    if isinstance(val, (int, float)) and key == "id" and not isinstance(val, bool):
        val = str(val)
    if not isinstance(val, str) or not val.strip():
        raise SchemaViolation(lineno, key, "is missing or not a non-empty string")
    return val


def record_to_example(rec: Any, lineno: int, level: CitationLevel, strict: bool = False) -> QAExample:
    if not isinstance(rec, dict):
        raise SchemaViolation(lineno, "<record>", "must be a JSON object")
    ex_id = _require_str(rec, "id", lineno)
    question = _require_str(rec, "question", lineno)
    passages = parse_passages(rec.get("passages"), lineno)
    answer = _require_str(rec, "answer", lineno)
    try:
        gold = parse_answer(answer, level, strict=strict)
    except CitationFormatError as exc:
        raise GoldParseError(lineno, str(exc)) from exc
    bad = sorted(i for i in cited_indices(gold) if i > len(passages))
    if bad:
        raise GoldParseError(lineno, f"gold cites passage {bad[0]} of {len(passages)}")
    scores = rec.get("external_scores")
    if scores is not None and not isinstance(scores, dict):
        raise SchemaViolation(lineno, "external_scores", "must be an object")
    return QAExample(
        id=ex_id,
        question=question,
        passages=passages,
        gold=gold,
        entities=_entities(rec.get("entities"), lineno),
        external_scores={k: float(v) for k, v in scores.items()} if scores else None,
    )


def load_dataset(path: str | Path, level: CitationLevel | str, strict: bool = False) -> LoadedDataset:
    """Read and validate a JSONL dataset, parsing gold answers at ``level``.

    In strict mode the first bad line raises (:class:`SchemaViolation` or
    :class:`GoldParseError`) and gold markup is parsed strictly; otherwise bad
    lines are logged, skipped and recorded in ``.skipped``.
    """
    level = CitationLevel.coerce(level)
    examples = LoadedDataset()
    seen: set[str] = set()
    for lineno, line in iter_lines(path):
        try:
            ex = record_to_example(_decode(line, lineno), lineno, level, strict)
            if ex.id in seen:
                raise SchemaViolation(lineno, "id", f"duplicate id {ex.id!r}")
        except (SchemaViolation, GoldParseError) as exc:
            if strict:
                raise
            log.warning("skipping %s: %s", path, exc)
            examples.skipped.append((lineno, str(exc)))
            continue
        seen.add(ex.id)
        examples.append(ex)
    return examples


def dump_dataset(examples: Iterable[QAExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
