#!/usr/bin/env python3
"""Overfit 20 synthetic examples with context and decode them back with k=1."""

from __future__ import annotations

import argparse
import time

from ctxoie.bootstrap import CombinedLabels
from ctxoie.context import LayoutConfig, build_dataset
from ctxoie.model import ModelConfig, TrainConfig, beam_extract, build_model, train
from ctxoie.synthetic import make_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    c = make_corpus(3, (8, 10), seed=3)
    data = build_dataset(c.docs, CombinedLabels.from_extractions(c.gold), t=2, cfg=LayoutConfig(128))[:20]
    model = build_model(data, ModelConfig(seed=args.seed))
    t0 = time.perf_counter()
    log = train(model, data, TrainConfig(epochs=args.epochs, batch_size=10, lr_bottom=1e-3, lr_other=3e-3,
                                         seed=args.seed))
    print(f"{len(log.epoch_loss)} epochs in {time.perf_counter() - t0:.1f} s, final loss {log.epoch_loss[-1]:.5f}")
    print(f"teacher-forced token accuracy {model.token_accuracy(data):.3f}")
    exact = 0
    for ex in data:
        res = beam_extract(model, ex, 1)
        got = res.extractions[0] if res.extractions else None
        ok = got is not None and ("<sub>", *got.subject, "<rel>", *got.relation, "<obj>", *got.object,
                                  "<eot>") == ex.target
        exact += ok
        if not ok:
            print("  miss:", " ".join(ex.target), "->", got)
    print(f"exact k=1 reproductions {exact}/{len(data)}")


if __name__ == "__main__":
    main()
