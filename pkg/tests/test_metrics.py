from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attribqa.citations import AttributedAnswer, CitedSpan, Passage, PlainText, cited_indices, parse_answer
from attribqa.errors import LevelMismatch, NotApplicableError, NoUnitsError
from attribqa.metrics import (
    Applicability,
    FunctionJudge,
    LexicalJudge,
    alce_citation_details,
    alce_citation_pr,
    alce_f1,
    csca,
    doc_f1,
    lcs_length,
    lexical_judge,
    rouge_l,
    score_example,
    sem_f1,
    token_f1,
    tokenize,
)

from helpers import lcs_dp

PS = [Passage(1, "alpha beta gamma"), Passage(2, "delta epsilon")]


class TestTokenizer:
    def test_empty(self):
        assert tokenize("") == []

    def test_lowercase_and_punctuation(self):
        assert tokenize("Hello, World! It's café.") == ["hello", "world", "it", "s", "café"]


class TestRougeL:
    def test_examples(self):
        assert rouge_l("a b c d", "a c d e") == 0.75
        assert rouge_l("same text", "same text") == 1.0
        assert rouge_l("a b", "c d") == 0.0
        assert rouge_l("", "") == 0.0

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from("abcde"), max_size=40), st.lists(st.sampled_from("abcde"), max_size=40))
    def test_lcs_matches_dp(self, a, b):
        assert lcs_length(a, b) == lcs_dp(a, b)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from("abc"), max_size=15), st.lists(st.sampled_from("abc"), max_size=15),
           st.lists(st.sampled_from("abc"), min_size=1, max_size=5))
    def test_shared_suffix_never_decreases_lcs(self, a, b, suffix):
        assert lcs_length(a + suffix, b + suffix) >= lcs_length(a, b)


class TestTokenF1:
    def test_examples(self):
        assert token_f1("x y", "y z") == 0.5
        assert token_f1("x y", "x y") == 1.0
        assert token_f1("x", "y") == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.text("ab xy", max_size=20), st.text("ab xy", max_size=20))
    def test_symmetric_and_bounded(self, a, b):
        assert token_f1(a, b) == token_f1(b, a)
        assert 0.0 <= token_f1(a, b) <= 1.0


class TestDocF1:
    def test_examples(self):
        p15 = parse_answer("x [1][5].", "passage")
        assert doc_f1(p15, p15) == 1.0
        assert doc_f1(p15, parse_answer("x [1].", "passage")) == pytest.approx(2 / 3)
        assert doc_f1(parse_answer("x.", "passage"), parse_answer("x [3].", "passage")) == 0.0
        assert doc_f1(parse_answer("x.", "passage"), parse_answer("y.", "passage")) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.sets(st.integers(1, 6)), st.sets(st.integers(1, 6)))
    def test_equals_one_iff_sets_equal(self, a, b):
        def ans(s):
            return parse_answer("x " + "".join(f"[{i}]" for i in sorted(s)) + ".", "passage")

        f = doc_f1(ans(a), ans(b))
        assert (f == 1.0) == (a == b)
        assert f == doc_f1(ans(b), ans(a))


class TestSemF1:
    def test_identity(self):
        g = parse_answer("[ 1 alpha beta ] and [ 2 delta ]", "span")
        assert sem_f1(g, g, PS) == 1.0

    def test_disjoint_indices(self):
        assert sem_f1(parse_answer("[ 1 alpha ]", "span"), parse_answer("[ 2 delta ]", "span"), PS) == 0.0

    def test_token_overlap(self):
        pred = parse_answer("[ 1 a b ]", "span")
        gold = parse_answer("[ 1 a c ]", "span")
        assert sem_f1(pred, gold, PS) == 0.5

    def test_both_uncited(self):
        assert sem_f1(parse_answer("x.", "sentence"), parse_answer("y.", "sentence"), PS) == 1.0

    def test_level_mismatch(self):
        with pytest.raises(LevelMismatch):
            sem_f1(parse_answer("x [1].", "sentence"), parse_answer("x [1].", "passage"), PS)


class TestCsca:
    def test_copied_spans(self):
        assert csca(parse_answer("[ 1 beta  gamma ] [ 2 delta ]", "span"), PS) == 1.0

    def test_one_altered(self):
        assert csca(parse_answer("[ 1 beta gamma ] [ 2 deltx ]", "span"), PS) == 0.5

    def test_out_of_range(self):
        ps = [Passage(i, f"text {i}") for i in range(1, 11)]
        assert csca(parse_answer("[ 99 text 1 ] [ 1 text 1 ]", "span"), ps) == 0.5

    def test_vacuous_and_not_applicable(self):
        assert csca(parse_answer("no spans", "span"), PS) == 1.0
        with pytest.raises(NotApplicableError):
            csca(parse_answer("x [1].", "sentence"), PS)


def table_judge(table):
    return FunctionJudge(lambda premise, hyp: table[premise])


class TestAlce:
    P = [Passage(1, "P1"), Passage(2, "P2")]

    def test_perfect(self):
        pred = parse_answer("claim [1].", "sentence")
        assert alce_citation_pr(pred, self.P, FunctionJudge(lambda p, h: p == "P1")) == (1.0, 1.0)

    def test_redundant_citation_is_imprecise(self):
        pred = parse_answer("claim [1][2].", "sentence")
        judge = table_judge({"P1": True, "P2": False, "P1\nP2": True})
        assert alce_citation_pr(pred, self.P, judge) == (0.5, 1.0)
        assert alce_citation_pr(pred, self.P, judge, gated=False) == (0.5, 1.0)

    @pytest.mark.parametrize("j1, j2, joint", list(itertools.product([True, False], repeat=3)))
    def test_truth_table(self, j1, j2, joint):
        pred = parse_answer("claim [1][2].", "sentence")
        judge = table_judge({"P1": j1, "P2": j2, "P1\nP2": joint})
        p, r = alce_citation_pr(pred, self.P, judge)
        # citation c is imprecise iff it fails alone and the other still entails
        literal = sum(not (not own and other) for own, other in [(j1, j2), (j2, j1)]) / 2
        assert r == float(joint)
        assert p == (literal if joint else 0.0)
        assert alce_citation_pr(pred, self.P, judge, gated=False)[0] == literal

    def test_uncited_unit(self):
        pred = parse_answer("claim.", "sentence")
        assert alce_citation_pr(pred, self.P, FunctionJudge(lambda p, h: True)) == (1.0, 0.0)

    def test_out_of_range_citation(self):
        res = alce_citation_details(parse_answer("a [1]. b [9].", "sentence"), self.P, FunctionJudge(lambda p, h: True))
        assert res.recall == 0.5 and res.n_citations == 1

    def test_span_answers_lift_to_sentences(self):
        pred = parse_answer("[ 1 alpha beta ] and [ 2 delta ] . Then more .", "span")
        res = alce_citation_details(pred, PS, lexical_judge(0.5))
        assert res.n_units == 2 and res.n_citations == 2

    def test_no_units(self):
        with pytest.raises(NoUnitsError):
            alce_citation_pr(AttributedAnswer("sentence", ()), self.P, lexical_judge())

    def test_f1(self):
        assert alce_f1(1, 1) == 1
        assert alce_f1(0.5, 1.0) == pytest.approx(2 / 3, abs=1e-4)
        assert alce_f1(0, 0) == 0
        with pytest.raises(ValueError):
            alce_f1(1.5, 0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_harmonic_below_arithmetic(self, p, r):
        assert alce_f1(p, r) <= (p + r) / 2 + 1e-12


class TestLexicalJudge:
    def test_examples(self):
        j = lexical_judge(0.5)
        assert j.entails("the cat sat on the mat", "cat sat")
        assert not j.entails("dogs bark", "cat sat")
        assert j.entails("alpha beta", "alpha beta gamma")
        assert not lexical_judge(0.9).entails("alpha beta", "alpha beta gamma")

    def test_threshold_bounds(self):
        with pytest.raises(ValueError):
            LexicalJudge(0)


class TestScoreExample:
    def test_identity(self):
        gold = parse_answer("[ 1 alpha beta gamma ] and [ 2 delta epsilon ] .", "span")
        rep = score_example(gold, gold, PS, lexical_judge(0.5), "span")
        for name in ("RL", "SEM-F1(t)", "DOC F1", "CSCA"):
            assert rep.per_metric[name] == 1.0
        assert rep.applicability["BERT"] is Applicability.EXTERNAL_PENDING
        assert rep.answer_avg == 1.0

    def test_uncited_prediction(self):
        gold = parse_answer("alpha beta [1].", "sentence")
        rep = score_example(parse_answer("alpha beta.", "sentence"), gold, PS, lexical_judge())
        assert rep.per_metric["DOC F1"] == 0.0 and rep.per_metric["SEM-F1(t)"] == 0.0
        assert rep.applicability["CSCA"] is Applicability.NOT_APPLICABLE

    def test_composes_per_metric_oracles(self):
        gold = parse_answer("alpha beta [1]. delta epsilon [2].", "sentence")
        pred = parse_answer("alpha beta [1]. delta epsilon [1].", "sentence")
        judge = lexical_judge(0.5)
        rep = score_example(pred, gold, PS, judge)
        assert rep.per_metric["DOC F1"] == pytest.approx(2 / 3)
        # index 1: pred "alpha beta delta epsilon" vs gold "alpha beta"; index 2: pred empty
        assert rep.per_metric["SEM-F1(t)"] == pytest.approx((token_f1("alpha beta delta epsilon", "alpha beta") + 0) / 2)
        p, r = alce_citation_pr(pred, PS, judge)
        assert (p, r) == (0.5, 0.5)
        assert rep.per_metric["ALCE F1"] == alce_f1(p, r)
        assert rep.per_metric["RL"] == 1.0
        assert rep.citation_avg == pytest.approx((0.5 + 2 / 3 + rep.per_metric["SEM-F1(t)"]) / 3)

    def test_external_scores(self):
        gold = parse_answer("x [1].", "passage")
        rep = score_example(gold, gold, PS, lexical_judge(), external={"BERT": 0.9})
        assert rep.applicability["BERT"] is Applicability.COMPUTED
        assert rep.applicability["HEM"] is Applicability.EXTERNAL_PENDING
        assert rep.answer_avg == pytest.approx((0.9 + 1.0) / 2)

    def test_dropping_all_spans_scores_zero_csca(self):
        gold = parse_answer("[ 1 alpha ] x", "span")
        rep = score_example(parse_answer("alpha x", "span"), gold, PS, lexical_judge())
        assert rep.per_metric["CSCA"] == 0.0

    def test_pure(self):
        gold = parse_answer("[ 1 alpha beta ] .", "span")
        pred = AttributedAnswer("span", [CitedSpan(2, "alpha"), PlainText(".")])
        a = score_example(pred, gold, PS, lexical_judge()).to_dict()
        b = score_example(pred, gold, PS, lexical_judge()).to_dict()
        assert a == b

    def test_scores_bounded_on_random_pairs(self):
        rng = random.Random(3)
        words = "alpha beta gamma delta epsilon".split()
        for _ in range(200):
            def ans():
                return parse_answer(
                    " ".join(f"{rng.choice(words)} [{rng.randint(1, 3)}]." for _ in range(rng.randint(1, 3))),
                    "sentence",
                )
            gold = ans()
            if max(cited_indices(gold)) > 2:
                continue
            rep = score_example(ans(), gold, PS, lexical_judge())
            assert all(0.0 <= v <= 1.0 for v in rep.per_metric.values())
