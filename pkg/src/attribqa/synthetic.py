"""Seeded synthetic corpora for tests, demos and smoke runs.

The generated world is small and regular: passages are sentences about
capitalized people and places, and gold answers copy fragments of them
verbatim.  Everything derives from ``random.Random(seed)``.
"""

from __future__ import annotations

import random
from typing import Any

from .citations import AttributedAnswer, CitationLevel, CitedSpan, Passage, PlainText
from .dataset import QAExample

FIRST = ["Ada", "Boris", "Carla", "Dmitri", "Elena", "Farid", "Greta", "Hiro", "Ines", "Jonas", "Kemal", "Lucia"]
LAST = ["Almeida", "Brandt", "Castillo", "Dubois", "Eriksen", "Fontaine", "Gallo", "Haddad", "Ivanova", "Jensen"]
PLACES = ["Lisbon", "Oslo", "Kyoto", "Quito", "Tunis", "Zagreb", "Hobart", "Recife", "Tartu", "Bergen"]
NOUNS = ["bridge", "library", "orchestra", "vaccine", "telescope", "festival", "railway", "museum", "novel", "harbor"]
ADJ = ["northern", "famous", "modern", "ancient", "small", "national", "public", "experimental", "annual", "old"]
VERBS = ["founded", "designed", "restored", "directed", "funded", "opened", "documented", "expanded", "led", "built"]
QWORDS = ["who", "what", "where", "when", "which"]
GLUE = ["and", "while", "whereas", "and later", "so that"]
OPENERS = ["", "According to the sources,", "In short,", "Notably,", "Also,"]


def _person(rng: random.Random) -> str:
    return f"{rng.choice(FIRST)} {rng.choice(LAST)}"


def _fact(rng: random.Random) -> str:
    return (
        f"{_person(rng)} {rng.choice(VERBS)} the {rng.choice(ADJ)} {rng.choice(NOUNS)} "
        f"of {rng.choice(PLACES)} in {rng.randint(1850, 2020)}"
    )


def make_passage(rng: random.Random, index: int, n_facts: int = 4) -> tuple[Passage, list[str]]:
    facts = [_fact(rng) for _ in range(n_facts)]
    return Passage(index, ". ".join(facts) + ".", title=f"{rng.choice(PLACES)} {rng.choice(NOUNS)}"), facts


def _fragment(rng: random.Random, fact: str) -> str:
    words = fact.split()
    if rng.random() < 0.5:
        return fact
    # a contiguous run of at least 4 words starting at the person's name
    end = rng.randint(4, len(words))
    return " ".join(words[:end])


def make_example(rng: random.Random, ex_id: str, n_passages: int = 5, n_sentences: int | None = None) -> QAExample:
    """One span-level example whose gold copies fragments of 1-3 passages."""
    made = [make_passage(rng, i + 1) for i in range(n_passages)]
    passages = tuple(p for p, _ in made)
    n_sentences = n_sentences or rng.randint(1, 3)
    segments: list = []
    for s in range(n_sentences):
        opener = rng.choice(OPENERS)
        if opener:
            segments.append(PlainText(opener + " "))
        for j in range(rng.randint(1, 2)):
            if j:
                segments.append(PlainText(f" {rng.choice(GLUE)} "))
            src = rng.randrange(n_passages)
            segments.append(CitedSpan(src + 1, _fragment(rng, rng.choice(made[src][1]))))
        segments.append(PlainText(" . " if s < n_sentences - 1 else " ."))
    gold = AttributedAnswer(CitationLevel.SPAN, segments)
    q = f"{rng.choice(QWORDS)} {rng.choice(VERBS)} the {rng.choice(ADJ)} {rng.choice(NOUNS)} of {rng.choice(PLACES)}?"
    return QAExample(ex_id, q, passages, gold)


def make_corpus(n: int, seed: int = 0, n_passages: int = 5) -> list[QAExample]:
    rng = random.Random(seed)
    return [make_example(rng, f"ex{i:04d}", n_passages) for i in range(n)]


def passage_labeled_record(rng: random.Random, ex_id: str, n_passages: int = 5) -> dict[str, Any]:
    """A passage-labeled record: answer sentences drawn from passages, block citation at the end."""
    made = [make_passage(rng, i + 1) for i in range(n_passages)]
    cited = sorted(rng.sample(range(1, n_passages + 1), rng.randint(1, min(3, n_passages))))
    sentences = []
    for c in cited:
        fact = rng.choice(made[c - 1][1])
        sentences.append(fact if rng.random() < 0.7 else f"{rng.choice(OPENERS[1:])} {fact.lower()}")
    body = ". ".join(sentences)
    markers = "".join(f"[{c}]" for c in cited)
    return {
        "id": ex_id,
        "question": f"{rng.choice(QWORDS)} {rng.choice(VERBS)} the {rng.choice(NOUNS)}?",
        "passages": [{"title": p.title, "text": p.text} for p, _ in made],
        "answer": f"{body} {markers}.",
    }


def passage_labeled_corpus(n: int, seed: int = 0, n_passages: int = 5) -> list[dict[str, Any]]:
    rng = random.Random(seed)
    return [passage_labeled_record(rng, f"p{i:04d}", n_passages) for i in range(n)]
