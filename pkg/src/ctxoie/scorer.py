"""Tuple-level scoring of extractions against gold tuples.

Two match modes are supported:

``TokenGraded``
    token overlap pooled over the three slots; precision over predicted
    tokens, recall over gold tokens.
``BinaryLenient``
    all-or-nothing: the relation slots must share a token, and so must
    every other slot that is non-empty in gold.

Tokens are compared case-insensitively after NFC normalization.

Within each sentence predictions and gold tuples are paired one-to-one
by a greedy pass over pair F1 (highest first; ties go to the lower
prediction index, then the lower gold index). Greedy is not always the
optimal assignment; :func:`optimal_assignment_weight` gives the exact
value for small problems.
"""

from __future__ import annotations

import enum
import itertools
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import CorpusError, Extraction, group_by_sentence


class MatchMode(enum.Enum):
    TokenGraded = "graded"
    BinaryLenient = "lenient"

    @classmethod
    def parse(cls, value: "str | MatchMode") -> "MatchMode":
        if isinstance(value, MatchMode):
            return value
        for m in cls:
            if value in (m.value, m.name):
                return m
        raise ValueError(f"unknown match mode {value!r}")


def f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass(frozen=True)
class PairScore:
    precision_match: float
    recall_match: float

    @property
    def f1_match(self) -> float:
        return f1(self.precision_match, self.recall_match)


@dataclass(frozen=True)
class CurvePoint:
    precision: float
    recall: float
    threshold: float

    @property
    def f1(self) -> float:
        return f1(self.precision, self.recall)


@dataclass
class ScoreReport:
    curve: list[CurvePoint]
    auc: float
    best_f1: float
    precision_at_best: float
    recall_at_best: float
    threshold_at_best: float | None = None
    mode: str = MatchMode.TokenGraded.value
    n_gold: int = 0
    n_pred: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "curve": [[p.precision, p.recall, p.threshold] for p in self.curve],
            "auc": self.auc,
            "best_f1": self.best_f1,
            "precision_at_best": self.precision_at_best,
            "recall_at_best": self.recall_at_best,
            "threshold_at_best": self.threshold_at_best,
            "mode": self.mode,
            "n_gold": self.n_gold,
            "n_pred": self.n_pred,
        }
        out.update(self.extra)
        return out


def _norm(tokens: Sequence[str]) -> Counter:
    return Counter(unicodedata.normalize("NFC", t).casefold() for t in tokens)


def _overlap(pred: Sequence[str], gold: Sequence[str]) -> int:
    return sum((_norm(pred) & _norm(gold)).values())


def slot_score(pred_slot: Sequence[str], gold_slot: Sequence[str]) -> tuple[float, float]:
    """Multiset token precision and recall of one slot.

    Two empty slots match perfectly; an empty slot against a non-empty one
    scores zero both ways.
    """
    if not pred_slot and not gold_slot:
        return 1.0, 1.0
    if not pred_slot or not gold_slot:
        return 0.0, 0.0
    common = _overlap(pred_slot, gold_slot)
    return common / len(pred_slot), common / len(gold_slot)


def tuple_match(pred: Extraction, gold: Extraction, mode: MatchMode) -> PairScore:
    if mode is MatchMode.TokenGraded:
        matched = sum(_overlap(p, g) for p, g in zip(pred.slots, gold.slots))
        n_pred = sum(len(s) for s in pred.slots)
        n_gold = sum(len(s) for s in gold.slots)
        return PairScore(matched / n_pred, matched / n_gold)
    if mode is MatchMode.BinaryLenient:
        if _overlap(pred.relation, gold.relation) == 0:
            return PairScore(0.0, 0.0)
        for p, g in zip(pred.slots, gold.slots):
            if g and _overlap(p, g) == 0:
                return PairScore(0.0, 0.0)
        return PairScore(1.0, 1.0)
    raise ValueError(f"unknown match mode {mode!r}")


def pair_matrix(
    preds: Sequence[Extraction], golds: Sequence[Extraction], mode: MatchMode
) -> list[list[PairScore]]:
    return [[tuple_match(p, g, mode) for g in golds] for p in preds]


def greedy_assign(scores: Sequence[Sequence[PairScore]]) -> list[tuple[int, int, PairScore]]:
    cands = [
        (-s.f1_match, i, j)
        for i, row in enumerate(scores)
        for j, s in enumerate(row)
        if s.f1_match > 0
    ]
    cands.sort()
    used_p, used_g = set(), set()
    out = []
    for _, i, j in cands:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        out.append((i, j, scores[i][j]))
    return out


def assign_matches(
    preds: Sequence[Extraction], golds: Sequence[Extraction], mode: MatchMode
) -> list[tuple[int, int, PairScore]]:
    """Greedy one-to-one pairing of one sentence's predictions and gold tuples.

    Returns ``(pred_idx, gold_idx, score)`` in the order pairs were taken.
    """
    return greedy_assign(pair_matrix(preds, golds, mode))


def optimal_assignment_weight(weights: Sequence[Sequence[float]]) -> float:
    """Exact maximum-weight one-to-one assignment by enumeration (small inputs)."""
    n_p = len(weights)
    n_g = len(weights[0]) if n_p else 0
    if n_p == 0 or n_g == 0:
        return 0.0
    best = 0.0
    if n_p <= n_g:
        for perm in itertools.permutations(range(n_g), n_p):
            best = max(best, sum(weights[i][perm[i]] for i in range(n_p)))
    else:
        for perm in itertools.permutations(range(n_p), n_g):
            best = max(best, sum(weights[perm[j]][j] for j in range(n_g)))
    return best


def _point(
    pred_groups: dict, gold_groups: dict, n_gold: int, mode: MatchMode, cache: dict
) -> tuple[float, float, int]:
    """Precision and recall for one set of kept predictions.

    Sentence keys are visited in sorted order so the floating-point sums do
    not depend on input order.
    """
    sum_p = 0.0
    sum_r = 0.0
    n_kept = 0
    for key in sorted(pred_groups):
        kept = pred_groups[key]
        n_kept += len(kept)
        golds = gold_groups.get(key)
        if not golds:
            continue
        for i, j, s in greedy_assign([[cache[(key, pi, gj)] for gj in range(len(golds))] for pi, _ in kept]):
            sum_p += s.precision_match
            sum_r += s.recall_match
    precision = sum_p / n_kept if n_kept else 0.0
    return precision, sum_r / n_gold, n_kept


def auc_from_curve(curve: Sequence[CurvePoint]) -> float:
    """Trapezoidal area under precision over recall.

    The curve is extended to recall 0 at the precision of its lowest-recall
    point.
    """
    if not curve:
        return 0.0
    pts = sorted(((c.recall, c.precision) for c in curve), key=lambda rp: rp[0])
    pts = [(0.0, pts[0][1])] + pts
    area = 0.0
    for (r0, p0), (r1, p1) in zip(pts, pts[1:]):
        area += (r1 - r0) * (p0 + p1) / 2
    return area


def score_extractions(
    preds: Sequence[Extraction],
    golds: Sequence[Extraction],
    mode: MatchMode = MatchMode.TokenGraded,
) -> ScoreReport:
    mode = MatchMode.parse(mode)
    if not golds:
        raise CorpusError("no gold tuples")
    gold_groups = group_by_sentence(golds)
    # stable per-sentence prediction index, independent of threshold
    pred_groups_all: dict = {}
    for ex in sorted(preds, key=_canonical_key):
        pred_groups_all.setdefault(ex.key, []).append(ex)

    cache = {}
    for key, plist in pred_groups_all.items():
        glist = gold_groups.get(key, [])
        for pi, p in enumerate(plist):
            for gj, g in enumerate(glist):
                cache[(key, pi, gj)] = tuple_match(p, g, mode)

    thresholds = sorted({ex.confidence for ex in preds}, reverse=True)
    curve = []
    for theta in thresholds:
        kept = {}
        for key, plist in pred_groups_all.items():
            sel = [(pi, p) for pi, p in enumerate(plist) if p.confidence >= theta]
            if sel:
                kept[key] = sel
        precision, recall, _ = _point(kept, gold_groups, len(golds), mode, cache)
        curve.append(CurvePoint(precision, recall, theta))

    if curve:
        best = max(curve, key=lambda c: (c.f1, c.threshold))
        best_f1, best_p, best_r, best_t = best.f1, best.precision, best.recall, best.threshold
    else:
        best_f1 = best_p = best_r = 0.0
        best_t = None
    return ScoreReport(
        curve=curve,
        auc=auc_from_curve(curve),
        best_f1=best_f1,
        precision_at_best=best_p,
        recall_at_best=best_r,
        threshold_at_best=best_t,
        mode=mode.value,
        n_gold=len(golds),
        n_pred=len(preds),
    )


def _canonical_key(ex: Extraction):
    # makes scoring independent of the order predictions arrive in
    return (ex.doc_id, ex.sent_idx, -ex.confidence, ex.subject, ex.relation, ex.object)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class Consistency:
    a_from_b: PRF
    b_from_a: PRF
    average: PRF

    def to_dict(self) -> dict:
        return {
            name: {"precision": v.precision, "recall": v.recall, "f1": v.f1}
            for name, v in (("A<-B", self.a_from_b), ("B<-A", self.b_from_a), ("average", self.average))
        }


def average_prf(a: PRF, b: PRF) -> PRF:
    """Per-metric arithmetic mean (the F1 is averaged, not recomputed)."""
    return PRF((a.precision + b.precision) / 2, (a.recall + b.recall) / 2, (a.f1 + b.f1) / 2)


def consistency(
    annot_a: Sequence[Extraction],
    annot_b: Sequence[Extraction],
    universe: Sequence[tuple[str, int]] | None = None,
) -> Consistency:
    """Agreement between two annotators under binary lenient matching.

    ``A<-B`` scores A's tuples with B's as gold; ``B<-A`` the reverse.
    Without an explicit universe, both annotators must have annotated the
    same set of sentences.
    """
    keys_a = {e.key for e in annot_a}
    keys_b = {e.key for e in annot_b}
    if universe is not None:
        uni = set(universe)
        if not (keys_a <= uni and keys_b <= uni):
            raise CorpusError("annotation refers to a sentence outside the universe")
    elif keys_a != keys_b:
        raise CorpusError(
            f"annotators cover different sentences ({len(keys_a ^ keys_b)} not shared)"
        )
    if not annot_a or not annot_b:
        raise CorpusError("no gold tuples")
    # single threshold: every tuple is treated as fully confident
    a = [_certain(e) for e in annot_a]
    b = [_certain(e) for e in annot_b]

    def direction(pred, gold) -> PRF:
        rep = score_extractions(pred, gold, MatchMode.BinaryLenient)
        pt = rep.curve[-1]
        return PRF(pt.precision, pt.recall, pt.f1)

    ab = direction(a, b)
    ba = direction(b, a)
    return Consistency(ab, ba, average_prf(ab, ba))


def _certain(ex: Extraction) -> Extraction:
    if ex.confidence == 1.0:
        return ex
    return Extraction(ex.doc_id, ex.sent_idx, ex.subject, ex.relation, ex.object, 1.0)
