"""Acceptance gate: one test per criterion, each printing a PASS/FAIL/SKIP line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
when output is captured), or directly with ``python tests/test_acceptance.py``.
Criterion 9 needs ``CTXOIE_EVAL_DOCS`` (documents.jsonl) and ``CTXOIE_EVAL_GOLD``
(gold tuple TSV) in the environment and is skipped otherwise.
"""

from __future__ import annotations

import json
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest
import torch

from ctxoie.bootstrap import FALLBACK, MAIN, CombinedLabels, combine
from ctxoie.context import SPECIAL_TOKENS, LayoutConfig, TrainingExample, build_dataset, build_window
from ctxoie.corpus import Document, Extraction, corpus_stats, load_documents, load_extractions
from ctxoie.model import ModelConfig, TrainConfig, beam_extract, build_model, grad_check, train
from ctxoie.model.gradcheck import tiny_case
from ctxoie.scorer import (
    PRF,
    MatchMode,
    assign_matches,
    average_prf,
    consistency,
    f1,
    optimal_assignment_weight,
    pair_matrix,
    score_extractions,
)
from ctxoie.synthetic import make_corpus

RESULTS: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool | None, detail: str):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"criterion {n:2d}: {status}  {detail}"
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line)

    return emit


def _mk(doc, sent, s, r, o, conf=1.0):
    return Extraction(doc, sent, tuple(s), tuple(r), tuple(o), conf)


# --------------------------------------------------------------------------- 1


def f1_interval(p, r, half=0.05):
    # F1 is increasing in both arguments, so the rounding box maps to [lo, hi]
    return f1(p - half, r - half), f1(p + half, r + half)


def distance(x, lo, hi):
    return max(lo - x, 0.0, x - hi)


def test_criterion_01_table4_arithmetic(report):
    t0 = time.perf_counter()
    rows = {"A<-B": (90.7, 92.4, 91.6), "B<-A": (84.6, 92.0, 88.2)}
    checks, notes = [], []
    intervals = {}
    for name, (p, r, want) in rows.items():
        lo, hi = f1_interval(p, r)
        intervals[name] = (lo, hi)
        checks.append(distance(want, lo, hi) <= 0.05 + 1e-9)
        notes.append(f"{name} F1 {f1(p, r):.2f} (interval [{lo:.3f}, {hi:.3f}], reported {want})")

    avg = average_prf(PRF(90.7, 92.4, f1(90.7, 92.4)), PRF(84.6, 92.0, f1(84.6, 92.0)))
    p_lo, p_hi = (90.65 + 84.55) / 2, (90.75 + 84.65) / 2
    r_lo, r_hi = (92.35 + 91.95) / 2, (92.45 + 92.05) / 2
    f_lo = (intervals["A<-B"][0] + intervals["B<-A"][0]) / 2
    f_hi = (intervals["A<-B"][1] + intervals["B<-A"][1]) / 2
    checks.append(distance(87.7, p_lo, p_hi) <= 0.05 + 1e-9)
    checks.append(distance(92.2, r_lo, r_hi) <= 0.05 + 1e-9)
    checks.append(distance(89.9, f_lo, f_hi) <= 0.05 + 1e-9)
    # the average of the reported F1 values themselves
    checks.append(abs((91.6 + 88.2) / 2 - 89.9) <= 0.05)
    notes.append(f"average {avg.precision:.2f}/{avg.recall:.2f}/{avg.f1:.2f} vs 87.7/92.2/89.9")
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 1.0
    report(1, ok, "; ".join(notes) + f"; {elapsed * 1000:.1f} ms")
    assert ok


# --------------------------------------------------------------------------- 2


def random_instance(rng: random.Random):
    vocab = "abcd"

    def slot():
        return [rng.choice(vocab) for _ in range(rng.randint(1, 2))]

    def side():
        out = []
        for i in range(rng.randint(1, 3)):
            for _ in range(rng.randint(1, 4)):
                out.append(_mk("d", i, slot(), slot(), slot(), rng.choice([0.2, 0.4, 0.6, 0.8, 1.0])))
        return out

    while True:
        a, b = side(), side()
        if {e.key for e in a} == {e.key for e in b}:
            return a, b


def test_criterion_02_scorer_identities(report):
    t0 = time.perf_counter()
    gold = [_mk("d", i, ["s", str(i)], ["r"], ["o"]) for i in range(4)]
    exact = {}
    for mode in MatchMode:
        rep = score_extractions(gold, gold, mode)
        exact[mode] = (rep.precision_at_best, rep.recall_at_best, rep.best_f1, rep.auc) == (1.0, 1.0, 1.0, 1.0)
        far = [_mk("d", i, ["x"], ["y"], ["z"]) for i in range(4)]
        rep = score_extractions(far, gold, mode)
        exact[mode] = exact[mode] and rep.best_f1 == 0.0 and rep.auc == 0.0

    rng = random.Random(2024)
    mono = {MatchMode.TokenGraded: 0, MatchMode.BinaryLenient: 0}
    sym = 0
    n = 1000
    for _ in range(n):
        a, b = random_instance(rng)
        for mode in mono:
            rs = [c.recall for c in score_extractions(a, b, mode).curve]
            if any(x > y + 1e-12 for x, y in zip(rs, rs[1:])):
                mono[mode] += 1
        c = consistency(a, b)
        if abs(c.a_from_b.precision - c.b_from_a.recall) > 1e-12:
            sym += 1
    elapsed = time.perf_counter() - t0
    ok = all(exact.values()) and not any(mono.values()) and sym == 0 and elapsed < 10
    report(
        2,
        ok,
        f"identities {'ok' if all(exact.values()) else 'BROKEN'}; over {n} instances: recall-monotonicity "
        f"violations graded={mono[MatchMode.TokenGraded]} lenient={mono[MatchMode.BinaryLenient]}, "
        f"symmetry P(A<-B)=R(B<-A) violations={sym}; {elapsed:.1f} s",
    )
    assert ok


# --------------------------------------------------------------------------- 3


def oracle_instance(rng: random.Random):
    vocab = [f"w{k}" for k in range(30)]
    n = rng.randint(8, 16)
    sent = [rng.choice(vocab) for _ in range(n)]

    def span_tuple():
        a, b, c, d = sorted(rng.sample(range(n + 1), 4))
        if b == a:
            b += 1
        return sent[a:b] or sent[:1], sent[b:c] or sent[b:b + 1] or sent[-1:], sent[c:d]

    def perturb(t):
        out = []
        for s in t:
            s = list(s)
            if s and rng.random() < 0.5:
                s = s[rng.randint(0, 1):len(s) - rng.randint(0, 1)] or s[:1]
            if rng.random() < 0.3:
                s = s + [rng.choice(sent)]
            out.append(s)
        return out

    golds = [span_tuple() for _ in range(rng.randint(1, 4))]
    preds = [perturb(rng.choice(golds)) if rng.random() < 0.7 else span_tuple() for _ in range(rng.randint(1, 4))]
    return [_mk("d", 0, *t) for t in preds], [_mk("d", 0, *t) for t in golds]


def test_criterion_03_assignment_oracle(report):
    rng = random.Random(3)
    n = 1000
    deviations = []
    for k in range(n):
        preds, golds = oracle_instance(rng)
        mode = MatchMode.TokenGraded
        weights = [[s.f1_match for s in row] for row in pair_matrix(preds, golds, mode)]
        greedy = sum(s.f1_match for _, _, s in assign_matches(preds, golds, mode))
        best = optimal_assignment_weight(weights)
        if greedy < best - 1e-12:
            deviations.append((k, greedy, best))
    match_rate = 1 - len(deviations) / n
    worst = min((g / b for _, g, b in deviations), default=1.0)
    log_dir = Path(os.environ.get("CTXOIE_ACCEPTANCE_LOGS", Path(__file__).resolve().parents[1] / "acceptance_logs"))
    log_dir.mkdir(parents=True, exist_ok=True)
    log = log_dir / "assignment_deviations.json"
    log.write_text(json.dumps([{"instance": k, "greedy": g, "optimum": b} for k, g, b in deviations], indent=1))
    ok = match_rate >= 0.95 and worst >= 0.75
    report(
        3,
        ok,
        f"greedy optimal on {match_rate:.1%} of {n} (need >= 95%); {len(deviations)} deviations, "
        f"worst greedy/optimum {worst:.3f} (need >= 0.75); logged to {log.name}",
    )
    assert ok


# --------------------------------------------------------------------------- 4


def _grid(max_n, max_t):
    fails = cases = 0
    for n in range(1, max_n + 1):
        doc = Document.from_tokens("d", [["x"]] * n)
        for i in range(n):
            for t in range(max_t + 1):
                want = [j for j in range(n) if j != i and abs(j - i) <= t]
                cases += 1
                fails += list(build_window(doc, i, t).context) != want
    return cases, fails


def test_criterion_04_window_builder(report):
    t0 = time.perf_counter()
    stated = _grid(10, 6)
    wide = _grid(11, 13)
    doc = Document.from_tokens("d", [["x"]] * 10)
    clip = (
        build_window(doc, 5, 2).context == (3, 4, 6, 7)
        and build_window(doc, 0, 5).context == (1, 2, 3, 4, 5)
        and build_window(doc, 9, 0).context == ()
    )
    elapsed = time.perf_counter() - t0
    ok = stated[1] == 0 and wide[1] == 0 and clip and elapsed < 1.0
    report(
        4,
        ok,
        f"N<=10,t<=6: {stated[0]} cases, {stated[1]} failures; N<=11,t<=13: {wide[0]} cases, "
        f"{wide[1]} failures; clipping examples {'ok' if clip else 'BROKEN'}; {elapsed * 1000:.0f} ms",
    )
    assert ok


# --------------------------------------------------------------------------- 5


def random_systems(rng: random.Random):
    universe = [(f"d{k}", i) for k in range(rng.randint(1, 3)) for i in range(rng.randint(1, 8))]

    def system(tag, p_empty):
        out = []
        for key in universe:
            if rng.random() < p_empty:
                continue
            for j in range(rng.randint(1, 3)):
                out.append(_mk(key[0], key[1], [f"{tag}{j}"], ["r"], ["o"]))
        return out

    return universe, system("m", rng.random()), system("f", rng.random())


def test_criterion_05_combiner(report):
    rng = random.Random(5)
    fails = {"main-preference": 0, "fallback-on-empty": 0, "omission": 0, "count-inequality": 0}
    n = 500
    for _ in range(n):
        universe, main, fb = random_systems(rng)
        out = combine(main, fb, universe)
        for key in universe:
            m = [e for e in main if e.key == key]
            f = [e for e in fb if e.key == key]
            if m:
                fails["main-preference"] += out.tuples.get(key) != m or out.provenance.get(key) != MAIN
            elif f:
                fails["fallback-on-empty"] += out.tuples.get(key) != f or out.provenance.get(key) != FALLBACK
            else:
                fails["omission"] += key in out.tuples
        n_m, n_f = len({e.key for e in main}), len({e.key for e in fb})
        fails["count-inequality"] += not (max(n_m, n_f) <= len(out) <= n_m + n_f)
    ok = not any(fails.values())
    report(5, ok, f"{n} random corpora; failures {fails}; absolute label counts are out of scope")
    assert ok


# --------------------------------------------------------------------------- 6


def random_tiny_config(rng: random.Random) -> dict:
    heads = rng.choice([1, 2])
    return {
        "d_bottom": rng.choice([4, 8]),
        "n_bottom": rng.choice([1, 2]),
        "d_top": rng.choice([4, 6, 8]) if heads == 1 else rng.choice([4, 8]),
        "ffn": rng.choice([4, 8]),
        "n_top": rng.choice([0, 1, 2]),
        "n_heads": heads,
        "d_dec": rng.choice([4, 6, 8]),
        "d_emb_dec": rng.choice([2, 4, 8]),
    }


def test_criterion_06_gradient_check(report):
    assert torch.get_default_dtype() in (torch.float32, torch.float64)
    t0 = time.perf_counter()
    rng = random.Random(6)
    errors = []
    for k in range(5):
        cfg = random_tiny_config(rng)
        model, ex = tiny_case(cfg, seed=100 + k, t=rng.choice([0, 1, 2]), extra_vocab=rng.choice([2, 4, 6]))
        assert all(p.dtype == torch.float64 for p in model.parameters())
        res = grad_check(model, ex)
        errors.append((res.max_rel_error, res.worst))

    model, ex = tiny_case(seed=7)

    def corrupt(grads):
        grads["cell.weight_hh"].view(-1)[3] += 1.0

    injected = grad_check(model, ex, tamper=corrupt).max_rel_error
    elapsed = time.perf_counter() - t0
    worst = max(e for e, _ in errors)
    ok = worst <= 1e-4 and injected > 1e-2 and elapsed < 60
    report(
        6,
        ok,
        f"max relative error over 5 random tiny configs {worst:.2e} (need <= 1e-4; "
        f"per config {', '.join(f'{e:.1e}' for e, _ in errors)}); fault injection {injected:.2e} "
        f"(need > 1e-2); {elapsed:.1f} s",
    )
    assert ok


# --------------------------------------------------------------------------- 7


def overfit_data():
    c = make_corpus(3, (8, 10), seed=3)
    labels = CombinedLabels.from_extractions(c.gold)
    return build_dataset(c.docs, labels, t=2, cfg=LayoutConfig(128))[:20]


def test_criterion_07_overfit(report):
    t0 = time.perf_counter()
    data = overfit_data()
    assert len(data) == 20 and all(1 in ex.segment_ids for ex in data)
    model = build_model(data, ModelConfig())
    tcfg = TrainConfig(epochs=300, batch_size=10, lr_bottom=1e-3, lr_other=3e-3, seed=0)
    tlog = train(model, data, tcfg)
    acc = model.token_accuracy(data)
    exact = 0
    for ex in data:
        res = beam_extract(model, ex, 1)
        if res.extractions:
            e = res.extractions[0]
            exact += ("<sub>", *e.subject, "<rel>", *e.relation, "<obj>", *e.object, "<eot>") == ex.target
    elapsed = time.perf_counter() - t0
    ok = acc >= 0.95 and exact >= 18 and elapsed < 300
    report(
        7,
        ok,
        f"token accuracy {acc:.3f} after {len(tlog.epoch_loss)} epochs (final loss {tlog.epoch_loss[-1]:.4f}); "
        f"k=1 exact {exact}/20; {elapsed:.0f} s",
    )
    assert ok


# --------------------------------------------------------------------------- 8


def test_criterion_08_isolation_and_context_flow(report):
    data = overfit_data()
    drift_max = 0.0
    flow_min = float("inf")
    for seed in range(5):
        model = build_model(data, ModelConfig(seed=seed))
        with torch.no_grad():
            for ex in data[:5]:
                b = model.make_batch([ex])
                enc = model.encode(b)
                n_src = ex.source_block_len
                h1 = enc.h1_full.clone()
                h1[:, n_src:] += torch.randn_like(h1[:, n_src:])
                _, h2, _ = model.encode_top(h1, b.src_len)
                drift_max = max(drift_max, float((h2 - enc.h2_src).abs().max()))

                k = n_src  # first context token
                new = next(w for w in model.vocab.itos[len(SPECIAL_TOKENS):] if w != ex.input[k])
                changed = TrainingExample(ex.input[:k] + (new,) + ex.input[k + 1:], ex.segment_ids, ex.target, ex.copy)
                h1_new = model.encode(model.make_batch([changed])).h1_src
                flow_min = min(flow_min, float((h1_new - enc.h1_src).abs().max()))
    ok = drift_max <= 1e-12 and flow_min >= 1e-6
    report(
        8,
        ok,
        f"h2_src drift under context perturbation {drift_max:.1e} (need <= 1e-12); "
        f"smallest h1_src change from one context token {flow_min:.2e} (need >= 1e-6); 5 inits x 5 examples",
    )
    assert ok


# --------------------------------------------------------------------------- 9


def test_criterion_09_dataset_statistics(report):
    docs_path, gold_path = os.environ.get("CTXOIE_EVAL_DOCS"), os.environ.get("CTXOIE_EVAL_GOLD")
    if not (docs_path and gold_path and Path(docs_path).exists() and Path(gold_path).exists()):
        report(9, None, "evaluation files not supplied (set CTXOIE_EVAL_DOCS and CTXOIE_EVAL_GOLD)")
        pytest.skip("evaluation dataset not supplied")
    st = corpus_stats(load_documents(docs_path), load_extractions(gold_path, gold=None))
    l_sent = st.metrics["L_sent"].average
    n_tup = st.metrics["N_tuple"].average
    ok = st.n_sent == 800 and st.n_tuple == 2122 and abs(l_sent - 22.69) <= 0.01 and abs(n_tup - 2.65) <= 0.01
    report(9, ok, f"{st.n_sent} sentences, {st.n_tuple} tuples, L_sent {l_sent:.3f}, tuples/sentence {n_tup:.3f}")
    assert ok


# -------------------------------------------------------------------------- 10

STATEMENT = (
    "absolute AUC/F1 values of the full-scale experiments need a pretrained bottom encoder, "
    "about 120k bootstrapped training sentences per domain and external extraction systems; "
    "they are not reproduced here"
)


def test_criterion_10_sweep_pipeline(report, tmp_path):
    script = Path(__file__).resolve().parents[1] / "scripts" / "run_window_sweep.py"
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, str(script), "--work", str(tmp_path)],
        capture_output=True, text=True,
    )
    reports = [tmp_path / "sweep" / f"report_t{t}.json" for t in range(1, 7)]
    ok = proc.returncode == 0 and all(p.exists() for p in reports)
    detail = ""
    if ok:
        vals = [json.loads(p.read_text()) for p in reports]
        ok = all(0.0 <= v["auc"] <= 1.0 and 0.0 <= v["best_f1"] <= 1.0 for v in vals)
        detail = "per-t AUC " + " ".join(f"t{v['t']}={v['auc']:.3f}" for v in vals)
    else:
        detail = proc.stderr.strip().splitlines()[-1:] or ["no output"]
        detail = f"pipeline failed: {detail[0]}"
    report(10, ok, f"{STATEMENT}. Substitute: synthetic --sweep-t 1..6 pipeline, {detail}; "
                   f"{time.perf_counter() - t0:.0f} s")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
