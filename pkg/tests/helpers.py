"""Random generators and independent oracles shared by the test modules."""

from __future__ import annotations

import random

from attribqa.citations import (
    AttributedAnswer,
    CitationLevel,
    CitedSentence,
    CitedSpan,
    PlainText,
    TerminalCitationBlock,
)
from attribqa.errors import InvariantViolation

WORDS = [
    "the", "band", "Tears", "for", "Fears", "song", "is", "a", "of", "1985", "3.5", "U.S.", "Dr.",
    "e.g.", "J.", "K.", "Rowling", "\"Shout\",", "(live)", "hit", "singles:", "rock-pop", "it's",
    "café", "naïve", "50%", "…", "'quoted'", "A", "x", "[a]", "x]", "mid,", "end;",
]
TERMINALS = [".", "?", "!", "...", "?!"]


def _words(rng: random.Random, lo: int = 1, hi: int = 8) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def _sentence(rng: random.Random) -> str:
    return _words(rng) + rng.choice(TERMINALS)


def _cits(rng: random.Random) -> list[int]:
    return [rng.randint(1, 12) for _ in range(rng.randint(1, 3))]


def _span_segments(rng: random.Random) -> list:
    segs = []
    for _ in range(rng.randint(1, 6)):
        if rng.random() < 0.5:
            segs.append(PlainText(rng.choice(["", " ", "  "]) + _words(rng, 1, 4) + rng.choice(["", " ", ". "])))
        else:
            text = _words(rng, 1, 6).replace("[", "(").replace("]", ")") + rng.choice(["", ".", "\","])
            segs.append(CitedSpan(rng.randint(1, 12), text))
    return segs


def _sentence_segments(rng: random.Random) -> list:
    segs = []
    for _ in range(rng.randint(1, 4)):
        s = _sentence(rng)
        segs.append(CitedSentence(s, _cits(rng)) if rng.random() < 0.75 else PlainText(s))
    return segs


def _passage_segments(rng: random.Random) -> list:
    text = " ".join(_sentence(rng) for _ in range(rng.randint(1, 4)))
    segs = [PlainText(text)]
    if rng.random() < 0.85:
        segs.append(TerminalCitationBlock(_cits(rng)))
    return segs


_BUILDERS = {
    CitationLevel.SPAN: _span_segments,
    CitationLevel.SENTENCE: _sentence_segments,
    CitationLevel.PASSAGE: _passage_segments,
}


def random_answer(rng: random.Random, level: CitationLevel) -> AttributedAnswer:
    """A random valid answer; draws that violate an invariant are redrawn."""
    while True:
        try:
            return AttributedAnswer(level, _BUILDERS[level](rng))
        except InvariantViolation:
            continue


def lcs_dp(a: list, b: list) -> int:
    """Textbook quadratic LCS table."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def greedy_marking_oracle(answer: str, passages, entities, min_len: int) -> list[tuple[int, int, int]]:
    """Literal execution of the greedy span-marking loop by brute force.

    Enumerates every answer substring, keeps the maximal ones found in each
    passage (edge spaces trimmed), filters by entity overlap, sorts by length (ties: earlier
    offset, lower passage index) and marks with an explicit per-character
    dictionary.  Returns sorted ``(start, end, passage_index)`` triples.
    """
    n = len(answer)
    candidates = []
    for p in passages:
        ptext = " ".join(p.text.split())
        texts = []
        for s in range(n):
            for e in range(s + 1, n + 1):
                sub = answer[s:e]
                if sub not in ptext:
                    break
                left = s > 0 and answer[s - 1 : e] in ptext
                right = e < n and answer[s : e + 1] in ptext
                sub = sub.strip()
                if not left and not right and len(sub) >= min_len and sub not in texts:
                    texts.append(sub)
        for t in texts:
            occ = [i for i in range(n - len(t) + 1) if answer[i : i + len(t)] == t]
            occ = [i for i in occ if any(en.start < i + len(t) and i < en.end for en in entities)]
            if occ:
                candidates.append((t, p.index, occ))
    candidates.sort(key=lambda c: (-len(c[0]), c[2][0], c[1]))
    marked = {i: None for i in range(n)}
    out = []
    for text, pidx, occ in candidates:
        for i in occ:
            if all(marked[j] is None for j in range(i, i + len(text))):
                for j in range(i, i + len(text)):
                    marked[j] = pidx
                out.append((i, i + len(text), pidx))
                break
    return sorted(out)
