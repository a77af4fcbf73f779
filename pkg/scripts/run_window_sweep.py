#!/usr/bin/env python3
"""End-to-end window-size sweep on a synthetic corpus.

extract -> combine -> windows -> train -> predict --sweep-t 1..6, all via
the command-line front end. Writes one score report per window size and a
``sweep.json`` summary under ``<work>/sweep``.

    python scripts/run_window_sweep.py --work runs/sweep
    python scripts/run_window_sweep.py --work /tmp/s --quick   # seconds, for tests
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from ctxoie.cli import main as cli
from ctxoie.corpus import Extraction, save_documents, save_extractions
from ctxoie.synthetic import make_corpus


@dataclass(frozen=True)
class SweepConfig:
    n_docs: int = 6
    sents_per_doc: tuple[int, int] = (10, 14)
    train_t: int = 3
    epochs: int = 40
    seed: int = 0
    sweep: str = "1..6"


QUICK = SweepConfig(n_docs=3, sents_per_doc=(7, 9), epochs=3)

MODEL = {"d_bottom": 32, "n_bottom": 1, "d_top": 16, "ffn": 64, "n_top": 1, "n_heads": 2,
         "d_dec": 32, "d_emb_dec": 16, "max_decode_len": 16, "beam": 3}


def run(*argv) -> None:
    rc = cli([str(a) for a in argv])
    if rc != 0:
        raise SystemExit(f"step failed ({rc}): {' '.join(map(str, argv))}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", type=Path, required=True)
    ap.add_argument("--quick", action="store_true", help="tiny corpus and 3 epochs")
    args = ap.parse_args(argv)
    cfg = QUICK if args.quick else SweepConfig()
    w = args.work
    w.mkdir(parents=True, exist_ok=True)

    # training documents and a held-out set scored against planted tuples
    train_c = make_corpus(cfg.n_docs, cfg.sents_per_doc, seed=cfg.seed)
    test_c = make_corpus(max(2, cfg.n_docs // 2), cfg.sents_per_doc, seed=cfg.seed + 1000, domain="heldout")
    test_docs = [d for d in test_c.docs]
    save_documents(train_c.docs, w / "train_docs.jsonl")
    save_documents(test_docs, w / "test_docs.jsonl")
    save_extractions(test_c.gold, w / "test_gold.tsv", gold=True)
    # the planted tuples stand in for the fallback system
    save_extractions(train_c.gold, w / "fallback.tsv")
    (w / "config.json").write_text(json.dumps({
        "model": {**MODEL, "seed": cfg.seed},
        "train": {"epochs": cfg.epochs, "batch_size": 16, "lr_bottom": 1e-3, "lr_other": 3e-3, "seed": cfg.seed},
    }, indent=2))

    run("extract", "--docs", w / "train_docs.jsonl", "--out", w / "main.tsv")
    run("combine", "--main", w / "main.tsv", "--fallback", w / "fallback.tsv",
        "--universe", w / "train_docs.jsonl", "--out", w / "labels.tsv", "--report", w / "labels.json")
    run("windows", "--docs", w / "train_docs.jsonl", "--labels", w / "labels.tsv",
        "--t", cfg.train_t, "--max-len", 128, "--out", w / "examples.jsonl")
    run("train", "--data", w / "examples.jsonl", "--config", w / "config.json",
        "--out", w / "model.json", "--log", w / "train_log.json")
    run("predict", "--model", w / "model.json", "--docs", w / "test_docs.jsonl",
        "--out", w / "sweep" / "pred.tsv", "--gold", w / "test_gold.tsv",
        "--sweep-t", cfg.sweep, "--report-dir", w / "sweep")

    for row in json.loads((w / "sweep" / "sweep.json").read_text()):
        print(f"t={row['t']}  auc={row['auc']:.4f}  best_f1={row['best_f1']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
