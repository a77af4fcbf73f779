import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxoie.corpus import CorpusError, Extraction
from ctxoie.scorer import (
    MatchMode,
    PairScore,
    assign_matches,
    auc_from_curve,
    consistency,
    f1,
    greedy_assign,
    optimal_assignment_weight,
    score_extractions,
    slot_score,
    tuple_match,
)

from conftest import ext

G, L = MatchMode.TokenGraded, MatchMode.BinaryLenient


def test_slot_score_examples():
    assert slot_score(["ate"], ["ate", "quickly"]) == (1.0, 0.5)
    assert slot_score(["x", "y"], ["x", "y"]) == (1.0, 1.0)
    assert slot_score([], []) == (1.0, 1.0)
    assert slot_score([], ["x"]) == (0.0, 0.0)
    assert slot_score(["x"], []) == (0.0, 0.0)


def test_slot_score_is_multiset_and_casefolded():
    assert slot_score(["a", "a", "b"], ["A", "b"]) == (2 / 3, 1.0)
    assert slot_score(["café"], ["CAFÉ"]) == (1.0, 1.0)


def test_tuple_match_examples():
    pred = ext(sub="he", rel="ate", obj="apple")
    gold = ext(sub="he", rel="ate quickly", obj="an apple")
    g = tuple_match(pred, gold, G)
    assert (g.precision_match, g.recall_match) == (1.0, pytest.approx(0.6))
    lenient = tuple_match(pred, gold, L)
    assert (lenient.precision_match, lenient.recall_match) == (1.0, 1.0)
    far = ext(sub="x", rel="y", obj="z")
    for mode in (G, L):
        s = tuple_match(far, gold, mode)
        assert (s.precision_match, s.recall_match, s.f1_match) == (0.0, 0.0, 0.0)


def test_lenient_needs_relation_overlap():
    assert tuple_match(ext(rel="x"), ext(rel="y"), L).f1_match == 0.0


def test_assignment_examples():
    e = ext()
    assert assign_matches([e], [e], G) == [(0, 0, PairScore(1.0, 1.0))]
    assert assign_matches([], [e], G) == []
    scores = [[PairScore(0.4, 0.4)], [PairScore(0.9, 0.9)]]
    assert [(i, j) for i, j, _ in greedy_assign(scores)] == [(1, 0)]


def test_assignment_ties_go_to_lower_indices():
    s = PairScore(1.0, 1.0)
    assert [(i, j) for i, j, _ in greedy_assign([[s, s], [s, s]])] == [(0, 0), (1, 1)]


def test_zero_pairs_never_assigned():
    z = PairScore(0.0, 0.0)
    assert greedy_assign([[z, z], [z, z]]) == []


def test_perfect_and_disjoint_systems():
    gold = [ext(sent=i, sub=f"s{i}", rel="r", obj="o") for i in range(3)]
    rep = score_extractions(gold, gold, G)
    assert (rep.precision_at_best, rep.recall_at_best, rep.best_f1, rep.auc) == (1.0, 1.0, 1.0, 1.0)
    bad = [ext(sent=i, sub="q", rel="w", obj="e") for i in range(3)]
    rep = score_extractions(bad, gold, L)
    assert rep.best_f1 == 0.0 and rep.auc == 0.0


def test_f1_of_reported_point():
    # reported value is 0.916; the rounded inputs give 0.9154
    assert f1(0.907, 0.924) == pytest.approx(0.916, abs=1e-3)
    assert f1(0.0, 0.0) == 0.0


def test_no_gold_is_an_error():
    with pytest.raises(CorpusError, match="no gold tuples"):
        score_extractions([ext()], [], G)


def test_curve_thresholds_and_zero_kept():
    gold = [ext(sent=0), ext(sent=1, sub="k")]
    preds = [ext(sent=0, conf=0.9), ext(sent=1, sub="k", conf=0.3), ext(sent=1, sub="zz", rel="zz", obj="zz", conf=0.3)]
    rep = score_extractions(preds, gold, G)
    assert [c.threshold for c in rep.curve] == [0.9, 0.3]
    assert [c.recall for c in rep.curve] == [0.5, 1.0]
    assert [c.precision for c in rep.curve] == [1.0, pytest.approx(2 / 3)]
    # recall-0 extension at precision 1.0, then trapezoid to (1.0, 2/3)
    assert rep.auc == pytest.approx(0.5 * 1.0 + 0.5 * (1 + 2 / 3) / 2)
    assert rep.best_f1 == pytest.approx(f1(2 / 3, 1.0))
    assert score_extractions([], gold, G).curve == []


def test_auc_single_point():
    rep = score_extractions([ext(conf=0.5)], [ext(), ext(sub="other", rel="x", obj="y")], G)
    assert rep.auc == pytest.approx(0.5)
    assert auc_from_curve([]) == 0.0


def test_report_schema():
    d = score_extractions([ext()], [ext()], L).to_dict()
    assert d["curve"] == [[1.0, 1.0, 1.0]]
    assert {"auc", "best_f1", "precision_at_best", "recall_at_best"} <= set(d)


def test_graded_recall_can_drop_as_threshold_falls():
    # p1 (lower confidence) has higher F1 but lower recall on g0 than p0,
    # so adding it steals g0 from p0
    g0 = ext(sub="a", rel="r", obj="b c d e f")
    p0 = ext(sub="a", rel="r", obj="b c d e f x x x x x x x", conf=1.0)
    p1 = ext(sub="a", rel="r", obj="b c d", conf=0.5)
    assert tuple_match(p1, g0, G).f1_match > tuple_match(p0, g0, G).f1_match
    rep = score_extractions([p0, p1], [g0], G)
    assert rep.curve[0].recall == 1.0
    assert rep.curve[1].recall == pytest.approx(5 / 7)


# ---------------------------------------------------------------- consistency


def test_consistency_identity():
    a = [ext(sent=0), ext(sent=1, obj="")]
    c = consistency(a, a)
    for prf in (c.a_from_b, c.b_from_a, c.average):
        assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)


def test_consistency_average_is_per_metric_mean():
    from ctxoie.scorer import PRF, average_prf

    avg = average_prf(PRF(0.907, 0.924, 0.916), PRF(0.846, 0.920, 0.882))
    assert round(avg.f1 * 100, 1) == 89.9
    assert round(avg.precision * 100, 2) == 87.65
    assert round(avg.recall * 100, 1) == 92.2


def test_consistency_requires_same_sentences():
    with pytest.raises(CorpusError):
        consistency([ext(sent=0)], [ext(sent=1)])


def test_consistency_ignores_confidence():
    a = [ext(conf=0.2), ext(sub="t", conf=0.9)]
    b = [ext(), ext(sub="t")]
    assert consistency(a, b).average.f1 == 1.0


def test_lenient_asymmetry_with_empty_object():
    # gold object empty lets the pred object be anything; reversed, it fails
    a = [ext(obj="")]
    b = [ext(obj="o")]
    c = consistency(a, b)
    assert c.a_from_b.precision == 0.0
    assert c.b_from_a.recall == 1.0


def test_symmetry_when_one_tuple_per_side():
    rng = random.Random(11)
    for _ in range(300):
        slot = lambda: " ".join(rng.choice("abc") for _ in range(rng.randint(1, 2)))
        a = [ext(sent=i, sub=slot(), rel=slot(), obj=slot()) for i in range(3)]
        b = [ext(sent=i, sub=slot(), rel=slot(), obj=slot()) for i in range(3)]
        c = consistency(a, b)
        assert c.a_from_b.precision == c.b_from_a.recall
        assert c.a_from_b.recall == c.b_from_a.precision


def test_greedy_symmetry_counterexample():
    # all lenient weights tie at 1.0, so greedy keeps the first maximal
    # matching in index order; transposing the roles changes that order
    a = [ext(sub="x", obj="x y"), ext(sub="y", obj="x y")]
    b = [ext(sub="x y", obj="y"), ext(sub="x", obj="y")]
    c = consistency(a, b)
    assert c.a_from_b.precision == 0.5
    assert c.b_from_a.recall == 1.0


# ----------------------------------------------------------------- properties

token = st.sampled_from(["a", "b", "c", "d", "e"])
slot_st = st.lists(token, min_size=1, max_size=3).map(tuple)
ex_st = st.builds(
    Extraction,
    doc_id=st.just("d"),
    sent_idx=st.integers(0, 2),
    subject=slot_st,
    relation=slot_st,
    object=st.lists(token, max_size=3).map(tuple),
    confidence=st.sampled_from([0.2, 0.5, 0.8, 1.0]),
)


@given(st.lists(ex_st, max_size=8), st.lists(ex_st, min_size=1, max_size=8), st.sampled_from([G, L]), st.randoms())
def test_scores_invariant_to_prediction_order(preds, golds, mode, rnd):
    shuffled = list(preds)
    rnd.shuffle(shuffled)
    assert score_extractions(preds, golds, mode).to_dict() == score_extractions(shuffled, golds, mode).to_dict()


@given(st.lists(ex_st, max_size=8), st.lists(ex_st, min_size=1, max_size=8), st.sampled_from([G, L]))
def test_curve_bounds(preds, golds, mode):
    rep = score_extractions(preds, golds, mode)
    ths = [c.threshold for c in rep.curve]
    assert ths == sorted(ths, reverse=True)
    for c in rep.curve:
        assert 0.0 <= c.precision <= 1.0 and 0.0 <= c.recall <= 1.0
    assert 0.0 <= rep.auc <= 1.0
    if rep.curve:
        assert rep.best_f1 == max(c.f1 for c in rep.curve)


@given(st.lists(ex_st, max_size=8), st.lists(ex_st, min_size=1, max_size=8))
def test_lenient_recall_non_decreasing(preds, golds):
    rs = [c.recall for c in score_extractions(preds, golds, L).curve]
    assert all(a <= b + 1e-12 for a, b in zip(rs, rs[1:]))


@given(st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=4), min_size=1, max_size=4))
def test_greedy_never_beats_optimum(rows):
    width = min(len(r) for r in rows)
    rows = [r[:width] for r in rows]
    scores = [[PairScore(w, w) for w in r] for r in rows]
    greedy = sum(s.f1_match for _, _, s in greedy_assign(scores))
    best = optimal_assignment_weight([[s.f1_match for s in r] for r in scores])
    assert greedy <= best + 1e-9
    assert greedy >= best / 2 - 1e-9
