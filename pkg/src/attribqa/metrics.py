"""Answer-quality and citation-quality metrics.

Answer quality: ROUGE-L on citation-stripped text, plus the neural BERT and
HEM scores, which are supplied externally through a sidecar file.  Citation
quality: ALCE F1, CSCA (span level only), DOC F1 and SEM-F1(t).

Every score is a float in [0, 1]; tables multiply by 100.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .citations import (
    AttributedAnswer,
    CitationLevel,
    CitedSpan,
    Passage,
    cited_content,
    cited_indices,
    collapse_ws,
    sentence_units,
    strip_citations,
)
from .errors import LevelMismatch, NotApplicableError, NoUnitsError

ANSWER_METRICS = ("BERT", "HEM", "RL")
CITATION_METRICS = ("ALCE F1", "CSCA", "DOC F1", "SEM-F1(t)")
EXTERNAL_METRICS = ("BERT", "HEM")
ALL_METRICS = ANSWER_METRICS + CITATION_METRICS


class Applicability(str, enum.Enum):
    COMPUTED = "Computed"
    NOT_APPLICABLE = "NotApplicable"
    EXTERNAL_PENDING = "ExternalPending"


# --------------------------------------------------------------------------
# tokenization


@dataclass(frozen=True)
class TokenizerSpec:
    """Word tokenizer used by every token-level metric.

    The default lowercases, applies NFKC, and keeps maximal runs of unicode
    word characters, so punctuation never forms a token.
    """

    lowercase: bool = True
    normalize: str | None = "NFKC"
    pattern: str = r"\w+"

    def __call__(self, text: str) -> list[str]:
        if self.normalize:
            text = unicodedata.normalize(self.normalize, text)
        if self.lowercase:
            text = text.lower()
        return _compiled(self.pattern).findall(text)


_PATTERNS: dict[str, re.Pattern] = {}


def _compiled(pattern: str) -> re.Pattern:
    if pattern not in _PATTERNS:
        _PATTERNS[pattern] = re.compile(pattern)
    return _PATTERNS[pattern]


DEFAULT_TOKENIZER = TokenizerSpec()


def tokenize(text: str, spec: TokenizerSpec = DEFAULT_TOKENIZER) -> list[str]:
    return spec(text)


# --------------------------------------------------------------------------
# answer quality


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence.

    Bit-parallel (Allison-Dix / Hyyro): one big-int word holds a DP column,
    so the cost is O(len(a) * len(b) / wordsize).
    """
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if m == 0:
        return 0
    masks: dict = {}
    for i, tok in enumerate(b):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << m) - 1
    v = full
    for tok in a:
        u = v & masks.get(tok, 0)
        v = ((v + u) | (v - u)) & full
    return m - bin(v).count("1")


def _f_measure(hits: float, n_pred: int, n_ref: int) -> float:
    if hits == 0 or n_pred == 0 or n_ref == 0:
        return 0.0
    p = hits / n_pred
    r = hits / n_ref
    return 2 * p * r / (p + r)


def rouge_l(candidate: str, reference: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> float:
    """LCS F-measure with beta = 1 over word tokens."""
    c = tokenizer(candidate)
    r = tokenizer(reference)
    return _f_measure(lcs_length(c, r), len(c), len(r))


def token_f1(a: str, b: str, tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> float:
    """Bag-of-tokens F1.  Two token-free strings score 1.0."""
    ta = tokenizer(a)
    tb = tokenizer(b)
    if not ta and not tb:
        return 1.0
    overlap = sum((Counter(ta) & Counter(tb)).values())
    return _f_measure(overlap, len(ta), len(tb))


# --------------------------------------------------------------------------
# citation quality


def _require_same_level(pred: AttributedAnswer, gold: AttributedAnswer) -> None:
    if pred.level is not gold.level:
        raise LevelMismatch(f"pred is {pred.level.value}, gold is {gold.level.value}")


def set_f1(pred: Iterable[int], gold: Iterable[int]) -> float:
    p, g = set(pred), set(gold)
    if not p and not g:
        return 1.0
    return _f_measure(len(p & g), len(p), len(g))


def doc_f1(pred: AttributedAnswer, gold: AttributedAnswer) -> float:
    """Set F1 between the cited passage indices of ``pred`` and ``gold``."""
    return set_f1(cited_indices(pred), cited_indices(gold))


def sem_f1(
    pred: AttributedAnswer,
    gold: AttributedAnswer,
    passages: Sequence[Passage],
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
) -> float:
    """SEM-F1(t): token F1 of cited content per passage, averaged over the cited-index union.

    Gold citations outside ``passages`` raise :class:`IndexOutOfRange`.  A
    prediction citing a nonexistent passage simply scores 0 for that index.
    """
    _require_same_level(pred, gold)
    gold_content = cited_content(gold, passages)
    pred_content = cited_content(pred)
    union = sorted(set(gold_content) | set(pred_content))
    if not union:
        return 1.0
    total = 0.0
    for idx in union:
        g = gold_content.get(idx)
        p = pred_content.get(idx)
        if g and p:
            total += token_f1(" ".join(p), " ".join(g), tokenizer)
    return total / len(union)


def csca_counts(pred: AttributedAnswer, passages: Sequence[Passage]) -> tuple[int, int]:
    """``(correct, total)`` cited spans of a span-level answer."""
    if pred.level is not CitationLevel.SPAN:
        raise NotApplicableError(f"CSCA is defined for span answers, not {pred.level.value}")
    texts = {p.index: collapse_ws(p.text) for p in passages}
    correct = total = 0
    for seg in pred.segments:
        if isinstance(seg, CitedSpan):
            total += 1
            src = texts.get(seg.passage_index)
            if src is not None and collapse_ws(seg.text) in src:
                correct += 1
    return correct, total


def csca(pred: AttributedAnswer, passages: Sequence[Passage]) -> float:
    """Fraction of cited spans that occur verbatim in the passage they cite."""
    correct, total = csca_counts(pred, passages)
    return correct / total if total else 1.0


# --------------------------------------------------------------------------
# entailment and ALCE


class EntailmentJudge(Protocol):
    def entails(self, premise: str, hypothesis: str) -> bool: ...


# English function words ignored by the lexical judge.
STOP_WORDS = frozenset(
    """a an the and or but nor so yet of in on at to for from by with into onto over under
    about as than then that this these those it its is are was were be been being am
    has have had do does did will would shall should can could may might must
    i you he she we they me him her us them my your his our their mine yours
    who whom whose which what where when why how there here not no
    also just only very too s t""".split()
)


@dataclass(frozen=True)
class LexicalJudge:
    """Entails iff enough of the hypothesis' content words occur in the premise.

    Content words are the unique tokens outside :data:`STOP_WORDS`.  A
    hypothesis consisting only of stop words falls back to all its tokens.
    """

    threshold: float = 0.5
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER
    stop_words: frozenset[str] = STOP_WORDS

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")

    def _content(self, text: str) -> set[str]:
        toks = set(self.tokenizer(text))
        return (toks - self.stop_words) or toks

    def recall(self, premise: str, hypothesis: str) -> float:
        hyp = self._content(hypothesis)
        if not hyp:
            return 1.0
        prem = set(self.tokenizer(premise))
        return len(hyp & prem) / len(hyp)

    def entails(self, premise: str, hypothesis: str) -> bool:
        return self.recall(premise, hypothesis) >= self.threshold


def lexical_judge(threshold: float = 0.5) -> LexicalJudge:
    return LexicalJudge(threshold)


class FunctionJudge:
    """Adapt a plain ``(premise, hypothesis) -> bool`` callable."""

    def __init__(self, fn: Callable[[str, str], bool]):
        self.fn = fn

    def entails(self, premise: str, hypothesis: str) -> bool:
        return bool(self.fn(premise, hypothesis))


def _passage_text(p: Passage) -> str:
    return f"{p.title}\n{p.text}" if p.title else p.text


@dataclass(frozen=True)
class AlceResult:
    precision: float
    recall: float
    n_units: int
    n_citations: int

    @property
    def f1(self) -> float:
        return alce_f1(self.precision, self.recall)


def alce_citation_details(
    pred: AttributedAnswer,
    passages: Sequence[Passage],
    judge: EntailmentJudge,
    *,
    gated: bool = True,
) -> AlceResult:
    """Citation precision and recall over the sentence units of ``pred``.

    Recall of a unit is 1 when the joint text of its cited passages entails
    it.  A citation is imprecise when it does not entail the unit alone while
    the rest of the unit's citations still do.  With ``gated`` (the ALCE
    reference behaviour) a unit's citations can only be precise if the unit
    is supported jointly.  A single citation is then precise exactly when it
    entails.  ``gated=False`` applies the imprecision rule alone.

    A unit with no citations scores recall 0.  A unit citing a missing passage
    scores recall 0, and its citations do not count towards precision.  An
    answer with no countable citations has precision 1.0.
    """
    units = [(collapse_ws(t), c) for t, c in sentence_units(pred)]
    units = [(t, c) for t, c in units if t]
    if not units:
        raise NoUnitsError("answer has no statement units")
    by_index = {p.index: _passage_text(p) for p in passages}

    def joint(indices: Iterable[int]) -> str:
        return "\n".join(by_index[i] for i in indices)

    supported = 0
    n_cit = 0
    precise = 0
    for text, cits in units:
        if not cits or any(c not in by_index for c in cits):
            continue
        n_cit += len(cits)
        ok = judge.entails(joint(cits), text)
        supported += ok
        if gated and not ok:
            continue
        if gated and len(cits) == 1:
            precise += 1
            continue
        for c in cits:
            if judge.entails(by_index[c], text):
                precise += 1
                continue
            rest = [o for o in cits if o != c]
            if not (rest and judge.entails(joint(rest), text)):
                precise += 1
    precision = precise / n_cit if n_cit else 1.0
    return AlceResult(precision, supported / len(units), len(units), n_cit)


def alce_citation_pr(
    pred: AttributedAnswer, passages: Sequence[Passage], judge: EntailmentJudge, *, gated: bool = True
) -> tuple[float, float]:
    res = alce_citation_details(pred, passages, judge, gated=gated)
    return res.precision, res.recall


def alce_f1(precision: float, recall: float) -> float:
    if not (0 <= precision <= 1 and 0 <= recall <= 1):
        raise ValueError("precision and recall must lie in [0, 1]")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# --------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    per_metric: dict[str, float] = field(default_factory=dict)
    applicability: dict[str, Applicability] = field(default_factory=dict)
    extra: dict[str, float] = field(default_factory=dict)

    def _avg(self, names: Sequence[str]) -> float | None:
        vals = [
            self.per_metric[n]
            for n in names
            if self.applicability.get(n) is Applicability.COMPUTED and n in self.per_metric
        ]
        return sum(vals) / len(vals) if vals else None

    @property
    def answer_avg(self) -> float | None:
        return self._avg(ANSWER_METRICS)

    @property
    def citation_avg(self) -> float | None:
        return self._avg(CITATION_METRICS)

    def set(self, name: str, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name}={value} outside [0, 1]")
        self.per_metric[name] = value
        self.applicability[name] = Applicability.COMPUTED

    def to_dict(self) -> dict:
        return {
            "per_metric": dict(self.per_metric),
            "applicability": {k: v.value for k, v in self.applicability.items()},
            "extra": dict(self.extra),
            "answer_avg": self.answer_avg,
            "citation_avg": self.citation_avg,
        }


def score_example(
    pred: AttributedAnswer,
    gold: AttributedAnswer,
    passages: Sequence[Passage],
    judge: EntailmentJudge,
    level: CitationLevel | str | None = None,
    *,
    external: Mapping[str, float] | None = None,
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
    gated: bool = True,
) -> MetricReport:
    """Score one prediction against its gold answer.

    ``external`` carries sidecar scores (``BERT``, ``HEM``); the names it lacks
    stay ExternalPending.  ``extra`` holds the ALCE precision/recall and the
    CSCA span counts used for corpus-level micro averaging.
    """
    level = CitationLevel.coerce(level) if level is not None else gold.level
    if pred.level is not level or gold.level is not level:
        raise LevelMismatch(f"expected {level.value} answers, got {pred.level.value}/{gold.level.value}")
    rep = MetricReport()
    external = external or {}
    for name in EXTERNAL_METRICS:
        if name in external:
            rep.set(name, float(external[name]))
        else:
            rep.applicability[name] = Applicability.EXTERNAL_PENDING
    rep.set("RL", rouge_l(strip_citations(pred), strip_citations(gold), tokenizer))
    try:
        alce = alce_citation_details(pred, passages, judge, gated=gated)
        rep.set("ALCE F1", alce.f1)
        rep.extra.update(alce_precision=alce.precision, alce_recall=alce.recall)
    except NoUnitsError:
        rep.set("ALCE F1", 0.0)
        rep.extra.update(alce_precision=0.0, alce_recall=0.0)
    if level is CitationLevel.SPAN:
        correct, total = csca_counts(pred, passages)
        gold_spans = len(gold.spans)
        if total:
            rep.set("CSCA", correct / total)
        else:
            # dropping every span is a failure, not a vacuous success
            rep.set("CSCA", 0.0 if gold_spans else 1.0)
        rep.extra.update(csca_correct=float(correct), csca_total=float(total))
    else:
        rep.applicability["CSCA"] = Applicability.NOT_APPLICABLE
    rep.set("DOC F1", doc_f1(pred, gold))
    rep.set("SEM-F1(t)", sem_f1(pred, gold, passages, tokenizer))
    return rep


__all__ = [
    "ANSWER_METRICS",
    "CITATION_METRICS",
    "EXTERNAL_METRICS",
    "ALL_METRICS",
    "Applicability",
    "TokenizerSpec",
    "tokenize",
    "lcs_length",
    "rouge_l",
    "token_f1",
    "set_f1",
    "doc_f1",
    "sem_f1",
    "csca",
    "csca_counts",
    "EntailmentJudge",
    "LexicalJudge",
    "FunctionJudge",
    "lexical_judge",
    "STOP_WORDS",
    "AlceResult",
    "alce_citation_details",
    "alce_citation_pr",
    "alce_f1",
    "MetricReport",
    "score_example",
]
