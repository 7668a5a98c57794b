from __future__ import annotations

import itertools
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attribqa.citations import CitedSpan, Passage, PlainText, collapse_ws, parse_answer, serialize, strip_citations
from attribqa.errors import MarkOutOfBounds, OverlappingMarks
from attribqa.labeling import (
    AnnotatedEntityRecognizer,
    EntitySpan,
    SpanMark,
    build_span_answer,
    builtin_entity_recognizer,
    common_substrings,
    convert_example,
    coverage,
    mark_spans,
)
from attribqa.metrics import csca

from conftest import WORKED_PASSAGE, WORKED_SPAN
from helpers import greedy_marking_oracle


def _common_dp(a: str, b: str, min_len: int) -> set[str]:
    """Maximal common substrings via the classic suffix-match table."""
    n, m = len(a), len(b)
    run = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n):
        for j in range(m):
            if a[i] == b[j]:
                run[i + 1][j + 1] = run[i][j] + 1
    best_end = {}
    for i in range(1, n + 1):
        best_end[i] = max(run[i])
    out = set()
    for e in range(1, n + 1):
        length = best_end[e]
        s = e - length
        right_ext = e < n and best_end[e + 1] >= length + 1
        left_ext = s > 0 and a[s - 1 : e] in b
        text = a[s:e].strip()
        if length and not right_ext and not left_ext and len(text) >= min_len:
            out.add(text)
    return out


class TestCommonSubstrings:
    def test_example(self):
        cs = common_substrings("abcde", Passage(7, "xxabcyy"), 2)
        assert [(c.text, c.passage_index, c.answer_positions, c.length) for c in cs] == [("abc", 7, (0,), 3)]

    def test_identity(self):
        assert [c.text for c in common_substrings("same", Passage(1, "same"), 1)] == ["same"]

    def test_disjoint(self):
        assert common_substrings("abc", Passage(1, "xyz"), 1) == []

    def test_all_occurrences_reported(self):
        cs = common_substrings("ab ab", Passage(1, "ab"), 2)
        assert cs[0].answer_positions == (0, 3)

    def test_min_len_validation(self):
        with pytest.raises(ValueError):
            common_substrings("a", Passage(1, "a"), 0)

    @settings(max_examples=200, deadline=None)
    @given(st.text("ab c", min_size=1, max_size=25), st.text("ab c", min_size=1, max_size=25), st.integers(1, 4))
    def test_matches_dp_oracle(self, a, b, k):
        if not b.strip():
            return
        got = {c.text for c in common_substrings(a, Passage(1, b), k)}
        assert got == _common_dp(collapse_ws(a), collapse_ws(b), k)


class TestRecognizer:
    def test_example(self):
        rec = builtin_entity_recognizer()
        text = "a song by Tears for Fears in 1985"
        found = {text[e.start : e.end] for e in rec.recognize(text)}
        assert {"Tears", "Fears", "1985"} <= found

    @pytest.mark.parametrize("text", ["", "the and of"])
    def test_empty(self, text):
        assert builtin_entity_recognizer().recognize(text) == []

    def test_runs_and_titles(self):
        rec = builtin_entity_recognizer()
        text = 'The band is Johnny Panic fans of "Head over Heels" today.'
        found = {(text[e.start : e.end], e.label) for e in rec.recognize(text)}
        assert ("Johnny Panic", "PROPER") in found
        assert ("Head over Heels", "TITLE") in found
        assert not any(t == "The" for t, _ in found)

    def test_annotated_bounds(self):
        with pytest.raises(MarkOutOfBounds):
            AnnotatedEntityRecognizer([EntitySpan(0, 10)]).recognize("short")


class TestMarkSpans:
    def test_partial_overlap_is_skipped(self):
        ps = [Passage(1, "we know Paris is in the north"), Passage(2, "located in France")]
        ents = AnnotatedEntityRecognizer([EntitySpan(0, 5, "GPE"), EntitySpan(12, 18, "GPE")])
        assert mark_spans("Paris is in France", ps, ents, min_len=3) == [SpanMark(0, 11, 1)]

    def test_exhaustive_orders_agree_on_the_example(self):
        # every permutation of the passage list gives the same marks
        ps = [Passage(1, "we know Paris is in the north"), Passage(2, "located in France")]
        ents = AnnotatedEntityRecognizer([EntitySpan(0, 5), EntitySpan(12, 18)])
        results = {tuple(mark_spans("Paris is in France", list(p), ents, 3)) for p in itertools.permutations(ps)}
        assert results == {(SpanMark(0, 11, 1),)}

    def test_whole_answer(self):
        ents = AnnotatedEntityRecognizer([EntitySpan(0, 4)])
        assert mark_spans("Rome is old", [Passage(1, "Rome is old")], ents, 3) == [SpanMark(0, 11, 1)]

    def test_no_entity_no_marks(self):
        ents = AnnotatedEntityRecognizer([])
        assert mark_spans("rome is old", [Passage(1, "rome is old")], ents, 3) == []

    def test_containment_mode(self):
        ents = AnnotatedEntityRecognizer([EntitySpan(5, 15)])
        ps = [Passage(1, "aaaa bbbbb")]
        answer = "aaaa bbbbb cccc"
        assert mark_spans(answer, ps, ents, 3) == [SpanMark(0, 10, 1)]
        assert mark_spans(answer, ps, ents, 3, containment=True) == []

    def test_worked_example_reconstructs_span_row(self, passages):
        # marking the passage-row text the way the hand-made span row does
        answer = strip_citations(parse_answer(WORKED_SPAN, "span"))
        texts = [
            ("Johnny Panic and the Bible of Dreams", 1),
            ("is a song by the British band Tears for Fears", 1),
            ("international hit singles", 5),
            ('"Mothers Talk", "Shout", "Everybody Wants to Rule the World", "Head over Heels", and "I Believe".', 5),
        ]
        marks = []
        pos = 0
        for t, idx in texts:
            s = answer.index(t, pos)
            marks.append(SpanMark(s, s + len(t), idx))
            pos = s + len(t)
        assert serialize(build_span_answer(answer, marks)) == collapse_ws(WORKED_SPAN)

    def test_random_instances_match_oracle(self):
        rng = random.Random(7)
        for _ in range(60):
            answer = " ".join("".join(rng.choice("ab Q") for _ in range(rng.randint(10, 60))).split()) or "Q"
            ps = [Passage(i + 1, answer[rng.randrange(len(answer)) :] + " zz " + answer[: rng.randint(1, 20)])
                  for i in range(rng.randint(1, 3))]
            ents = [EntitySpan(s, min(len(answer), s + 2)) for s in rng.sample(range(len(answer)), min(3, len(answer)))]
            got = [(m.start, m.end, m.passage_index) for m in mark_spans(answer, ps, AnnotatedEntityRecognizer(ents), 3)]
            assert got == greedy_marking_oracle(answer, ps, ents, 3)


class TestBuildSpanAnswer:
    def test_single_mark(self):
        a = build_span_answer("a b c", [SpanMark(2, 3, 1)])
        assert a.segments == (PlainText("a "), CitedSpan(1, "b"), PlainText(" c"))

    def test_no_marks(self):
        assert build_span_answer("a b c", []).segments == (PlainText("a b c"),)

    def test_errors(self):
        with pytest.raises(OverlappingMarks):
            build_span_answer("abcdef", [SpanMark(0, 3, 1), SpanMark(2, 4, 2)])
        with pytest.raises(MarkOutOfBounds):
            build_span_answer("abc", [SpanMark(1, 9, 1)])
        with pytest.raises(MarkOutOfBounds):
            SpanMark(3, 3, 1)

    @settings(max_examples=200, deadline=None)
    @given(st.text("ab .[]", min_size=1, max_size=30), st.data())
    def test_strip_recovers_answer(self, answer, data):
        answer = collapse_ws(answer)
        if not answer:
            return
        cuts = sorted(data.draw(st.sets(st.integers(0, len(answer)), max_size=6)))
        marks = [SpanMark(s, e, 1) for s, e in zip(cuts[::2], cuts[1::2]) if s < e]
        built = build_span_answer(answer, marks)
        assert re.sub(r"\s", "", strip_citations(built)) == re.sub(r"\s", "", answer)


class TestConvertExample:
    def test_restricted_to_cited_passages(self):
        ps = [Passage(i, f"Filler text number {i} about Nothing.") for i in range(1, 11)]
        ps[2] = Passage(3, "Ada Lovelace wrote the first program in 1843.")
        ps[6] = Passage(7, "Charles Babbage designed the Analytical Engine.")
        answer = "Ada Lovelace wrote the first program, and Charles Babbage designed the Analytical Engine."
        ex = convert_example("who?", ps, answer, {3, 7}, example_id="m1")
        assert {s.passage_index for s in ex.gold.spans} <= {3, 7}
        assert csca(ex.gold, ps) == 1.0
        assert ex.meta["coverage"] > 0.5 and not ex.meta["low_coverage"]

    def test_entity_free_answer_is_low_coverage(self):
        ps = [Passage(1, "the cat sat on the mat all day")]
        ex = convert_example("q", ps, "the cat sat on the mat", {1})
        assert ex.gold.spans == [] and ex.meta["low_coverage"]

    def test_verbatim_sentence(self):
        sentence = "Marie Curie won the Nobel Prize in 1903"
        ps = [Passage(1, f"Intro text. {sentence}. More text.")]
        ex = convert_example("q", ps, sentence + ".", {1})
        assert len(ex.gold.spans[0].text) >= len(sentence)

    def test_unknown_citation(self):
        with pytest.raises(ValueError):
            convert_example("q", [Passage(1, "x")], "x", {2})

    def test_coverage(self):
        assert coverage("abcd", [SpanMark(0, 2, 1)]) == 0.5
        assert coverage("", []) == 0.0


def test_passage_row_has_passage_markup():
    assert WORKED_PASSAGE.endswith("[1][5].")
