"""Evaluation matrix runner, journals, aggregation and report rendering.

A run evaluates every (citation level, CoT method) cell.  Each cell writes
one journal line per example with the raw model response, so scoring is a
pure fold over journals: it can be repeated offline with another judge, and
an interrupted run resumes where it stopped.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .citations import (
    AttributedAnswer,
    CitationLevel,
    Passage,
    cited_indices,
    convert_level,
    parse_answer,
    strip_citations,
)
from .client import (
    BatchResult,
    CompletionClient,
    EchoGoldClient,
    GenerationConfig,
    batch_complete,
)
from .dataset import QAExample, iter_lines, parse_passages, _decode, _entities, _require_str
from .errors import (
    AttribQAError,
    CitationFormatError,
    EmptyInputError,
    LevelMismatch,
    PoolTooSmall,
    SchemaViolation,
)
from .labeling import (
    DEFAULT_LOW_COVERAGE,
    DEFAULT_MIN_LEN,
    AnnotatedEntityRecognizer,
    EntityRecognizer,
    convert_example,
)
from .metrics import (
    ALL_METRICS,
    ANSWER_METRICS,
    CITATION_METRICS,
    Applicability,
    EntailmentJudge,
    LexicalJudge,
    score_example,
)
from .prompting import (
    CoTMethod,
    Templates,
    TfidfScorer,
    build_prompt,
    default_templates,
    load_templates,
    render_target,
    select_fewshot,
    split_response,
)

log = logging.getLogger(__name__)

LEVEL_ORDER = (CitationLevel.SPAN, CitationLevel.SENTENCE, CitationLevel.PASSAGE)
METHOD_ORDER = (CoTMethod.NONE, CoTMethod.SPAN, CoTMethod.SENTENCE, CoTMethod.PASSAGE)
FEWSHOT_ORDERS = ("most_similar_last", "most_similar_first")
MISSING = "–"


# --------------------------------------------------------------------------
# run specification


@dataclass(frozen=True)
class RunSpec:
    levels: tuple[CitationLevel, ...] = LEVEL_ORDER
    methods: tuple[CoTMethod, ...] = METHOD_ORDER
    k_fewshot: int = 4
    fewshot_order: str = "most_similar_last"
    judge: str = "lexical"
    judge_threshold: float = 0.5
    seed: int = 0
    max_in_flight: int = 4
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    templates: str | None = None

    def __post_init__(self):
        levels = tuple(CitationLevel.coerce(x) for x in self.levels)
        methods = tuple(CoTMethod.coerce(x) for x in self.methods)
        if not levels or not methods:
            raise ValueError("a run needs at least one level and one CoT method")
        if self.k_fewshot < 0:
            raise ValueError("k_fewshot must be >= 0")
        if self.fewshot_order not in FEWSHOT_ORDERS:
            raise ValueError(f"fewshot_order must be one of {FEWSHOT_ORDERS}")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        # canonical order keeps reports independent of how the RunSpec was written
        object.__setattr__(self, "levels", tuple(x for x in LEVEL_ORDER if x in levels))
        object.__setattr__(self, "methods", tuple(x for x in METHOD_ORDER if x in methods))
        make_judge(self.judge, self.judge_threshold)

    @property
    def cells(self) -> list[tuple[CitationLevel, CoTMethod]]:
        return [(lv, m) for lv in self.levels for m in self.methods]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["levels"] = [x.value for x in self.levels]
        d["methods"] = [x.value for x in self.methods]
        if d["generation"]["stop"] is not None:
            d["generation"]["stop"] = list(d["generation"]["stop"])
        return d


def make_judge(name: str, threshold: float = 0.5) -> EntailmentJudge:
    if name == "lexical":
        return LexicalJudge(threshold)
    raise ValueError(f"unknown judge {name!r}; built-in judges: lexical")


def cell_key(level: CitationLevel, method: CoTMethod) -> str:
    return f"{level.value}/{method.value}"


# --------------------------------------------------------------------------
# journals


@dataclass(frozen=True)
class JournalRecord:
    example_id: str
    raw_response: str | None
    parse_status: str
    error: str | None = None
    truncated: bool = False
    k_used: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)


PARSE_STATUSES = ("ok", "lenient", "empty", "request_error")


def parse_status(raw: str | None, level: CitationLevel) -> str:
    if raw is None:
        return "request_error"
    _, answer = split_response(raw)
    try:
        parse_answer(answer, level, strict=True)
        return "ok"
    except EmptyInputError:
        return "empty"
    except CitationFormatError:
        return "lenient"


class Journal:
    """Append-only JSONL of :class:`JournalRecord`; later lines win on replay.

    Without a path the journal lives in memory.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._memory: list[JournalRecord] = []

    def records(self) -> dict[str, JournalRecord]:
        out: dict[str, JournalRecord] = {}
        if self.path is None:
            for r in self._memory:
                out[r.example_id] = r
            return out
        if not self.path.exists():
            return out
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    rec = JournalRecord(**json.loads(line))
                except (ValueError, TypeError):
                    # torn final line of a killed run
                    log.warning("ignoring unreadable journal line in %s", self.path)
                    continue
                out[rec.example_id] = rec
        return out

    def append(self, records: Iterable[JournalRecord]) -> None:
        records = list(records)
        if self.path is None:
            self._memory.extend(records)
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        torn = False
        if self.path.exists() and self.path.stat().st_size:
            with open(self.path, "rb") as fh:
                fh.seek(-1, os.SEEK_END)
                torn = fh.read(1) != b"\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            if torn:
                # isolate a partial line left by a killed writer
                fh.write("\n")
            for r in records:
                fh.write(r.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def journal_path(workdir: str | Path, level: CitationLevel, method: CoTMethod) -> Path:
    return Path(workdir) / "journal" / f"{level.value}__{method.value}.jsonl"


# --------------------------------------------------------------------------
# reports


@dataclass
class CellReport:
    level: CitationLevel
    method: CoTMethod
    n_examples: int = 0
    n_scored: int = 0
    n_failed: int = 0
    means: dict[str, float | None] = field(default_factory=dict)
    applicability: dict[str, str] = field(default_factory=dict)
    extra: dict[str, float | None] = field(default_factory=dict)
    parse_counts: dict[str, int] = field(default_factory=dict)
    per_example: list[dict[str, Any]] = field(default_factory=list)

    def _avg(self, names: Sequence[str]) -> float | None:
        vals = [
            self.means[n]
            for n in names
            if self.applicability.get(n) == Applicability.COMPUTED.value and self.means.get(n) is not None
        ]
        return sum(vals) / len(vals) if vals else None

    @property
    def answer_avg(self) -> float | None:
        return self._avg(ANSWER_METRICS)

    @property
    def citation_avg(self) -> float | None:
        return self._avg(CITATION_METRICS)

    def to_dict(self) -> dict[str, Any]:
        return {
            "level": self.level.value,
            "method": self.method.value,
            "n_examples": self.n_examples,
            "n_scored": self.n_scored,
            "n_failed": self.n_failed,
            "means": self.means,
            "applicability": self.applicability,
            "answer_avg": self.answer_avg,
            "citation_avg": self.citation_avg,
            "extra": self.extra,
            "parse_counts": self.parse_counts,
            "per_example": self.per_example,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CellReport":
        return cls(
            level=CitationLevel(d["level"]),
            method=CoTMethod(d["method"]),
            n_examples=d["n_examples"],
            n_scored=d["n_scored"],
            n_failed=d["n_failed"],
            means=dict(d["means"]),
            applicability=dict(d["applicability"]),
            extra=dict(d.get("extra", {})),
            parse_counts=dict(d.get("parse_counts", {})),
            per_example=list(d.get("per_example", [])),
        )


@dataclass
class AggregateReport:
    cells: dict[str, CellReport] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    def cell(self, level: CitationLevel | str, method: CoTMethod | str) -> CellReport:
        return self.cells[cell_key(CitationLevel.coerce(level), CoTMethod.coerce(method))]

    def ordered(self) -> list[CellReport]:
        out = []
        for lv in LEVEL_ORDER:
            for m in METHOD_ORDER:
                c = self.cells.get(cell_key(lv, m))
                if c is not None:
                    out.append(c)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"cells": {k: c.to_dict() for k, c in self.cells.items()}, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AggregateReport":
        d = json.loads(text)
        return cls({k: CellReport.from_dict(v) for k, v in d["cells"].items()}, d.get("meta", {}))


def _mean(vals: Sequence[float]) -> float | None:
    return sum(vals) / len(vals) if vals else None


def aggregate_cell(
    level: CitationLevel, method: CoTMethod, n_examples: int, n_failed: int, records: list[dict[str, Any]]
) -> CellReport:
    """Corpus means over per-example records; each metric averages its Computed entries only."""
    cell = CellReport(level, method, n_examples=n_examples, n_scored=len(records), n_failed=n_failed)
    for name in ALL_METRICS:
        vals = [r["scores"][name] for r in records if r["applicability"].get(name) == Applicability.COMPUTED.value]
        cell.means[name] = _mean(vals)
        if vals:
            cell.applicability[name] = Applicability.COMPUTED.value
        elif records:
            cell.applicability[name] = records[0]["applicability"][name]
        else:
            cell.applicability[name] = "Missing"
    for key in ("alce_precision", "alce_recall"):
        cell.extra[key] = _mean([r["extra"][key] for r in records if key in r["extra"]])
    if level is CitationLevel.SPAN and records:
        correct = sum(r["extra"].get("csca_correct", 0.0) for r in records)
        total = sum(r["extra"].get("csca_total", 0.0) for r in records)
        cell.extra["csca_micro"] = correct / total if total else (1.0 if not any(r["gold_spans"] for r in records) else 0.0)
        cell.extra["csca_macro"] = cell.means["CSCA"]
    for r in records:
        cell.parse_counts[r["parse_status"]] = cell.parse_counts.get(r["parse_status"], 0) + 1
    if n_failed:
        cell.parse_counts["request_error"] = n_failed
    cell.per_example = records
    return cell


# --------------------------------------------------------------------------
# external scores (sidecar protocol)


def sidecar_id(level: CitationLevel, method: CoTMethod, example_id: str) -> str:
    return f"{level.value}/{method.value}/{example_id}"


def load_sidecar_responses(path: str | Path) -> dict[str, dict[str, float]]:
    """Read ``{id, metric, score}`` lines into ``{id: {metric: score}}``."""
    out: dict[str, dict[str, float]] = {}
    for lineno, line in iter_lines(path):
        rec = _decode(line, lineno)
        try:
            score = float(rec["score"])
            out.setdefault(str(rec["id"]), {})[str(rec["metric"])] = score
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(lineno, "score", "sidecar lines need id, metric and a numeric score") from exc
        if not 0.0 <= score <= 1.0:
            raise SchemaViolation(lineno, "score", f"{score} is outside [0, 1]")
    return out


def _external_for(ex: QAExample, level: CitationLevel, method: CoTMethod, sidecar: Mapping[str, Mapping[str, float]]):
    scores: dict[str, float] = {}
    for name, val in (ex.external_scores or {}).items():
        parts = name.split("/")
        if len(parts) == 1:
            scores.setdefault(name, val)
        elif len(parts) == 3 and parts[0] == level.value and parts[1] == method.value:
            scores[parts[2]] = val
    scores.update(sidecar.get(sidecar_id(level, method, ex.id), {}))
    return scores


# --------------------------------------------------------------------------
# scoring


def _empty(level: CitationLevel) -> AttributedAnswer:
    return AttributedAnswer(level, ())


def score_record(
    rec: JournalRecord,
    ex: QAExample,
    level: CitationLevel,
    method: CoTMethod,
    judge: EntailmentJudge,
    sidecar: Mapping[str, Mapping[str, float]] | None = None,
) -> dict[str, Any]:
    assert rec.raw_response is not None
    _, answer = split_response(rec.raw_response)
    try:
        pred = parse_answer(answer, level)
    except EmptyInputError:
        pred = _empty(level)
    external = _external_for(ex, level, method, sidecar or {})
    rep = score_example(pred, ex.gold, ex.passages, judge, level, external=external)
    return {
        "example_id": ex.id,
        "parse_status": rec.parse_status,
        "truncated": rec.truncated,
        "scores": dict(rep.per_metric),
        "applicability": {k: v.value for k, v in rep.applicability.items()},
        "extra": dict(rep.extra),
        "gold_spans": len(ex.gold.spans),
    }


def score_cell(
    examples: Sequence[QAExample],
    journal: Journal,
    level: CitationLevel,
    method: CoTMethod,
    judge: EntailmentJudge,
    sidecar: Mapping[str, Mapping[str, float]] | None = None,
) -> CellReport:
    """Fold a cell's journal into a :class:`CellReport`, in dataset order.

    ``examples`` must already be at ``level``.  Request errors and examples
    missing from the journal count as failed and are excluded from the means.
    """
    done = journal.records()
    records = []
    failed = 0
    for ex in examples:
        rec = done.get(ex.id)
        if rec is None or rec.raw_response is None:
            failed += 1
            continue
        records.append(score_record(rec, ex, level, method, judge, sidecar))
    return aggregate_cell(level, method, len(examples), failed, records)


# --------------------------------------------------------------------------
# running


def at_level(examples: Sequence[QAExample], level: CitationLevel) -> list[QAExample]:
    out = []
    for ex in examples:
        if ex.gold.level is level:
            out.append(ex)
            continue
        try:
            gold = convert_level(ex.gold, level)
        except LevelMismatch as exc:
            raise LevelMismatch(
                f"example {ex.id!r} has {ex.gold.level.value} gold; cannot evaluate at {level.value}"
            ) from exc
        out.append(QAExample(ex.id, ex.question, ex.passages, gold, ex.entities, ex.external_scores, ex.meta))
    return out


def _echo_targets(client: CompletionClient) -> EchoGoldClient | None:
    seen = set()
    while client is not None and id(client) not in seen:
        seen.add(id(client))
        if isinstance(client, EchoGoldClient):
            return client
        client = getattr(client, "base", None)
    return None


def _target(ex: QAExample, method: CoTMethod, templates: Templates) -> str:
    if method is not CoTMethod.NONE and not cited_indices(ex.gold):
        return render_target(ex, CoTMethod.NONE, templates)
    return render_target(ex, method, templates)


class _CellRunner:
    def __init__(self, pool: Sequence[QAExample], level, method, spec: RunSpec, templates: Templates):
        self.level = level
        self.method = method
        self.spec = spec
        self.templates = templates
        if method is not CoTMethod.NONE:
            pool = [ex for ex in pool if cited_indices(ex.gold)]
        self.pool = list(pool)
        self.scorer = TfidfScorer([ex.question for ex in self.pool])

    def fewshots(self, ex: QAExample) -> list[QAExample]:
        cands = [p for p in self.pool if p.id != ex.id]
        k = self.spec.k_fewshot
        if k > len(cands):
            raise PoolTooSmall(f"need {k} fewshots for {ex.id!r} but the pool offers {len(cands)}")
        chosen = select_fewshot(ex.question, cands, k, self.scorer)
        if self.spec.fewshot_order == "most_similar_last":
            chosen.reverse()
        return chosen

    def prompt(self, ex: QAExample, shots: Sequence[QAExample]) -> str:
        return build_prompt(ex.question, ex.passages, shots, self.level, self.method, self.templates).render()


def run_cell(
    examples: Sequence[QAExample],
    pool: Sequence[QAExample],
    level: CitationLevel,
    method: CoTMethod,
    spec: RunSpec,
    client: CompletionClient,
    journal: Journal,
    templates: Templates | None = None,
) -> None:
    """Query the model for every example of the cell not yet journaled.

    Examples already answered are skipped; request errors are retried.  Work
    goes out in chunks and each chunk is journaled before the next starts, so
    an interruption loses at most one chunk.
    """
    templates = templates or default_templates()
    runner = _CellRunner(pool, level, method, spec, templates)
    echo = _echo_targets(client)
    done = {k for k, r in journal.records().items() if r.raw_response is not None}
    todo = [ex for ex in examples if ex.id not in done]
    chunk = spec.max_in_flight * 4
    for start in range(0, len(todo), chunk):
        batch = todo[start : start + chunk]
        shots = [runner.fewshots(ex) for ex in batch]
        prompts = [runner.prompt(ex, s) for ex, s in zip(batch, shots)]
        if echo is not None:
            for ex, p in zip(batch, prompts):
                echo.stage(p, _target(ex, method, templates))
        results = batch_complete(client, prompts, spec.generation, spec.max_in_flight)
        records = []
        for ex, s, res in zip(batch, shots, results):
            k_used = len(s)
            while res.error_type == "ContextOverflow" and k_used > 0:
                # drop the least similar exemplar and try again
                k_used -= 1
                s = s[1:] if spec.fewshot_order == "most_similar_last" else s[:-1]
                p = runner.prompt(ex, s)
                if echo is not None:
                    echo.stage(p, _target(ex, method, templates))
                res = batch_complete(client, [p], spec.generation, 1)[0]
            records.append(_record(ex, res, level, k_used))
        journal.append(records)


def _record(ex: QAExample, res: BatchResult, level: CitationLevel, k_used: int) -> JournalRecord:
    if not res.ok:
        return JournalRecord(ex.id, None, "request_error", res.error, False, k_used)
    return JournalRecord(ex.id, res.text, parse_status(res.text, level), None, res.truncated, k_used)


def dataset_fingerprint(examples: Sequence[QAExample]) -> str:
    h = hashlib.sha256()
    for ex in examples:
        h.update(json.dumps(ex.to_record(), sort_keys=True, ensure_ascii=False).encode())
        h.update(b"\n")
    return h.hexdigest()


def _check_manifest(workdir: Path, manifest: dict[str, Any]) -> None:
    path = workdir / "run.json"
    if path.exists():
        old = json.loads(path.read_text(encoding="utf-8"))
        if old != manifest:
            raise ValueError(
                f"{workdir} holds a run with different settings or data; use a fresh workdir to start over"
            )
    else:
        workdir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def run_matrix(
    dataset: Sequence[QAExample],
    spec: RunSpec,
    client: CompletionClient | None = None,
    *,
    pool: Sequence[QAExample] | None = None,
    workdir: str | Path | None = None,
    judge: EntailmentJudge | None = None,
    sidecar: Mapping[str, Mapping[str, float]] | None = None,
) -> AggregateReport:
    """Run and score every cell of ``spec``.

    ``pool`` is the fewshot training split (default: ``dataset`` itself, an
    example never serving as its own exemplar).  ``client`` defaults to an
    echo-gold mock.  With ``workdir`` journals persist and a rerun resumes.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    client = client if client is not None else EchoGoldClient()
    judge = judge or make_judge(spec.judge, spec.judge_threshold)
    templates = load_templates(spec.templates) if spec.templates else default_templates()
    pool = dataset if pool is None else pool
    meta = {
        "spec": spec.to_dict(),
        "dataset_sha256": dataset_fingerprint(dataset),
        "pool_sha256": dataset_fingerprint(pool),
        "n_examples": len(dataset),
        "template_version": templates.version,
    }
    if workdir is not None:
        workdir = Path(workdir)
        _check_manifest(workdir, meta)
    report = AggregateReport(meta=meta)
    for level in spec.levels:
        examples = at_level(dataset, level)
        level_pool = at_level(pool, level)
        for method in spec.methods:
            journal = Journal(journal_path(workdir, level, method) if workdir is not None else None)
            run_cell(examples, level_pool, level, method, spec, client, journal, templates)
            report.cells[cell_key(level, method)] = score_cell(examples, journal, level, method, judge, sidecar)
    return report


def rescore(
    dataset: Sequence[QAExample],
    workdir: str | Path,
    judge: EntailmentJudge,
    sidecar: Mapping[str, Mapping[str, float]] | None = None,
    meta: Mapping[str, Any] | None = None,
) -> AggregateReport:
    """Score existing journals offline, without contacting any endpoint."""
    report = AggregateReport(meta=dict(meta or {}))
    for level in LEVEL_ORDER:
        examples = None
        for method in METHOD_ORDER:
            path = journal_path(workdir, level, method)
            if not path.exists():
                continue
            if examples is None:
                examples = at_level(dataset, level)
            report.cells[cell_key(level, method)] = score_cell(examples, Journal(path), level, method, judge, sidecar)
    if not report.cells:
        raise FileNotFoundError(f"no journals under {Path(workdir) / 'journal'}")
    return report


def write_sidecar_requests(dataset: Sequence[QAExample], workdir: str | Path, out_path: str | Path) -> int:
    """Emit ``{id, candidate, reference}`` lines for an external scorer; returns the line count."""
    n = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for level in LEVEL_ORDER:
            examples = None
            for method in METHOD_ORDER:
                path = journal_path(workdir, level, method)
                if not path.exists():
                    continue
                examples = examples or at_level(dataset, level)
                done = Journal(path).records()
                for ex in examples:
                    rec = done.get(ex.id)
                    if rec is None or rec.raw_response is None:
                        continue
                    _, answer = split_response(rec.raw_response)
                    try:
                        candidate = strip_citations(parse_answer(answer, level))
                    except EmptyInputError:
                        candidate = ""
                    line = {"id": sidecar_id(level, method, ex.id), "candidate": candidate,
                            "reference": strip_citations(ex.gold)}
                    fh.write(json.dumps(line, ensure_ascii=False) + "\n")
                    n += 1
    return n


# --------------------------------------------------------------------------
# rendering


def _fmt(val: float | None) -> str:
    return MISSING if val is None else f"{100 * val:.2f}"


_COLUMNS = ("BERT", "HEM", "RL", "answer_avg", "ALCE F1", "CSCA", "DOC F1", "SEM-F1(t)", "citation_avg")
_HEADERS = ("BERT", "HEM", "RL", "Avg.", "ALCE F1", "CSCA", "DOC F1", "SEM-F1(t)", "Avg.")


def _value(cell: CellReport, col: str) -> float | None:
    if col == "answer_avg":
        return cell.answer_avg
    if col == "citation_avg":
        return cell.citation_avg
    if cell.applicability.get(col) != Applicability.COMPUTED.value:
        return None
    return cell.means.get(col)


def render_markdown(report: AggregateReport) -> str:
    """Per-level blocks, one row per CoT method; the best value per level and column is bold."""
    lines = [
        "| Level | CoT | " + " | ".join(_HEADERS) + " |",
        "|:--|:--|" + "--:|" * len(_HEADERS),
    ]
    for level in LEVEL_ORDER:
        cells = [c for c in report.ordered() if c.level is level]
        if not cells:
            continue
        shown = [[_fmt(_value(c, col)) for col in _COLUMNS] for c in cells]
        best = []
        for j in range(len(_COLUMNS)):
            vals = [float(row[j]) for row in shown if row[j] != MISSING]
            best.append(max(vals) if vals else None)
        for i, (cell, row) in enumerate(zip(cells, shown)):
            rendered = [f"**{v}**" if v != MISSING and float(v) == best[j] else v for j, v in enumerate(row)]
            label = level.short if i == 0 else ""
            lines.append(f"| {label} | {cell.method.short} | " + " | ".join(rendered) + " |")
    return "\n".join(lines) + "\n"


def render_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "cot", *_COLUMNS, "n_examples", "n_scored", "n_failed"])
    for c in report.ordered():
        vals = ["" if (v := _value(c, col)) is None else repr(v) for col in _COLUMNS]
        w.writerow([c.level.value, c.method.value, *vals, c.n_examples, c.n_scored, c.n_failed])
    return buf.getvalue()


def emit_report(report: AggregateReport, fmt: str = "markdown", out_path: str | Path | None = None) -> str:
    """Render ``report`` as ``markdown``, ``csv`` or ``json``; write it when ``out_path`` is given."""
    renderers = {"markdown": render_markdown, "md": render_markdown, "csv": render_csv, "json": AggregateReport.to_json}
    if fmt not in renderers:
        raise ValueError(f"unknown report format {fmt!r}")
    text = renderers[fmt](report)
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


# --------------------------------------------------------------------------
# corpus conversion


@dataclass
class ConversionStats:
    n_lines: int = 0
    n_converted: int = 0
    n_errors: int = 0
    mean_coverage: float = 0.0
    low_coverage_fraction: float = 0.0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["errors"] = [list(e) for e in self.errors]
        return d


def _passage_labeled(rec: Any, lineno: int) -> tuple[str, str, tuple[Passage, ...], str, list[int]]:
    if not isinstance(rec, dict):
        raise SchemaViolation(lineno, "<record>", "must be a JSON object")
    ex_id = _require_str(rec, "id", lineno)
    question = _require_str(rec, "question", lineno)
    passages = parse_passages(rec.get("passages"), lineno)
    raw = _require_str(rec, "answer", lineno)
    ans = parse_answer(raw, CitationLevel.PASSAGE)
    cited = set(cited_indices(ans))
    extra = rec.get("cited_passages") or []
    if not isinstance(extra, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in extra):
        raise SchemaViolation(lineno, "cited_passages", "must be a list of integers")
    cited.update(extra)
    bad = sorted(i for i in cited if not 1 <= i <= len(passages))
    if bad:
        raise SchemaViolation(lineno, "answer", f"cites passage {bad[0]} of {len(passages)}")
    return ex_id, question, passages, strip_citations(ans), sorted(cited)


def convert_corpus(
    path_in: str | Path,
    path_out: str | Path,
    *,
    min_len: int = DEFAULT_MIN_LEN,
    containment: bool = False,
    low_coverage_threshold: float = DEFAULT_LOW_COVERAGE,
    recognizer: EntityRecognizer | None = None,
) -> ConversionStats:
    """Turn a passage-labeled JSONL corpus into span-labeled JSONL.

    Per-line entity annotations (offsets into the citation-free answer) take
    precedence over ``recognizer``.  Bad lines are counted and skipped.
    """
    stats = ConversionStats()
    coverages: list[float] = []
    low = 0
    with open(path_out, "w", encoding="utf-8") as out:
        for lineno, line in iter_lines(path_in):
            stats.n_lines += 1
            try:
                rec = _decode(line, lineno)
                ex_id, question, passages, plain, cited = _passage_labeled(rec, lineno)
                ents = _entities(rec.get("entities"), lineno)
                rz = AnnotatedEntityRecognizer(ents) if ents is not None else recognizer
                ex = convert_example(
                    question, passages, plain, cited, rz, min_len,
                    example_id=ex_id, low_coverage_threshold=low_coverage_threshold, containment=containment,
                )
            except (AttribQAError, ValueError) as exc:
                stats.n_errors += 1
                stats.errors.append((lineno, str(exc)))
                log.warning("convert: line %d skipped: %s", lineno, exc)
                continue
            record = ex.to_record()
            record["meta"] = dict(ex.meta)
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            stats.n_converted += 1
            coverages.append(ex.meta["coverage"])
            low += bool(ex.meta["low_coverage"])
    if coverages:
        stats.mean_coverage = sum(coverages) / len(coverages)
        stats.low_coverage_fraction = low / len(coverages)
    return stats


# --------------------------------------------------------------------------
# config file


def load_config(path: str | Path) -> dict[str, str]:
    """Read a ``key = value`` file (``#`` comments allowed) into a dict with ``_`` keys."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[run]\n" + text, source=str(path))
    return {k.strip().replace("-", "_"): v.strip() for k, v in parser["run"].items()}


__all__ = [
    "RunSpec",
    "make_judge",
    "cell_key",
    "JournalRecord",
    "Journal",
    "journal_path",
    "parse_status",
    "CellReport",
    "AggregateReport",
    "aggregate_cell",
    "score_record",
    "score_cell",
    "at_level",
    "run_cell",
    "run_matrix",
    "rescore",
    "sidecar_id",
    "load_sidecar_responses",
    "write_sidecar_requests",
    "render_markdown",
    "render_csv",
    "emit_report",
    "ConversionStats",
    "convert_corpus",
    "load_config",
]
