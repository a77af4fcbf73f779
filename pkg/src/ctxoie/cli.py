"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed
input). Every report is written as JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import bootstrap, context, corpus, extractor, scorer

log = logging.getLogger("ctxoie")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
LOG_ENV = "CTXOIE_LOG_LEVEL"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(p)


def parse_sweep(text: str) -> list[int]:
    """``"1..6"`` -> ``[1, 2, 3, 4, 5, 6]``."""
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad window range {text!r}")
    return list(range(lo, hi + 1))


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args) -> int:
    _require(args.docs, args.gold)
    docs = corpus.load_documents(args.docs, args.format)
    gold = corpus.load_extractions(args.gold, gold=None) if args.gold else []
    st = corpus.corpus_stats(docs, gold)
    report = st.to_dict()
    report["formatted"] = st.to_dict(ndigits=2)["metrics"]
    if args.report:
        _write_json(report, args.report)
    print(json.dumps(st.to_dict(ndigits=2), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_extract(args) -> int:
    _require(args.tagged, args.docs)
    if args.tagged:
        sentences = corpus.load_tagged_conll(args.tagged)
    else:
        sentences = [s for d in corpus.load_documents(args.docs) for s in d.sentences]
    exs = extractor.extract_all(sentences)
    corpus.save_extractions(exs, args.out)
    log.info("%d tuples from %d sentences", len(exs), len(sentences))
    return EXIT_OK


def cmd_combine(args) -> int:
    _require(args.main, args.fallback, args.universe)
    docs = corpus.load_documents(args.universe)
    main = corpus.load_extractions(args.main)
    fb = corpus.load_extractions(args.fallback)
    labels = bootstrap.combine(main, fb, bootstrap.sentence_universe(docs))
    bootstrap.save_combined(labels, args.out)
    st = bootstrap.label_stats(labels)
    if args.report:
        _write_json(vars(st), args.report)
    log.info("combined: %d sentences, %d tuples", st.n_sent, st.n_tuple)
    return EXIT_OK


def cmd_score(args) -> int:
    _require(args.pred, args.gold)
    preds = corpus.load_extractions(args.pred)
    gold = corpus.load_extractions(args.gold, gold=None)
    rep = scorer.score_extractions(preds, gold, scorer.MatchMode.parse(args.mode))
    _write_json(rep.to_dict(), args.report)
    print(f"auc={rep.auc:.4f} P={rep.precision_at_best:.4f} R={rep.recall_at_best:.4f} F1={rep.best_f1:.4f}")
    return EXIT_OK


def cmd_consistency(args) -> int:
    _require(args.a, args.b)
    a = corpus.load_extractions(args.a, gold=None)
    b = corpus.load_extractions(args.b, gold=None)
    res = scorer.consistency(a, b)
    _write_json(res.to_dict(), args.report)
    for name, v in res.to_dict().items():
        print(f"{name}: P={v['precision']:.4f} R={v['recall']:.4f} F1={v['f1']:.4f}")
    return EXIT_OK


def cmd_windows(args) -> int:
    _require(args.docs, args.labels)
    docs = corpus.load_documents(args.docs)
    labels = bootstrap.load_combined(args.labels)
    exs = context.build_dataset(docs, labels, args.t, context.LayoutConfig(args.max_len))
    context.save_examples(exs, args.out)
    log.info("%d examples", len(exs))
    return EXIT_OK


def _load_config(path: str | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "model" in obj or "train" in obj:
        return dict(obj.get("model", {})), dict(obj.get("train", {}))
    return dict(obj), {}


def cmd_train(args) -> int:
    _require(args.data, args.config)
    from .model import ModelConfig, TrainConfig, build_model, save_model, train

    model_over, train_over = _load_config(args.config)
    for key in ("epochs", "batch_size", "lr_bottom", "lr_other"):
        if getattr(args, key) is not None:
            train_over[key] = getattr(args, key)
    if args.seed is not None:
        train_over["seed"] = args.seed
        model_over["seed"] = args.seed
    data = context.load_examples(args.data)
    if not data:
        raise corpus.CorpusError(f"{args.data}: no examples")
    mcfg = ModelConfig.from_dict({**ModelConfig().to_dict(), **model_over})
    if "max_len" not in model_over:
        mcfg = mcfg.with_(max_len=max(mcfg.max_len, max(len(e.input) for e in data)))
    model = build_model(data, mcfg, max_vocab=args.max_vocab)
    tlog = train(model, data, TrainConfig.from_dict(train_over), checkpoint=args.out)
    save_model(model, args.out, {"epoch_loss": tlog.epoch_loss})
    if args.log:
        _write_json({"epoch_loss": tlog.epoch_loss, "n_unk_targets": tlog.n_unk_targets}, args.log)
    return EXIT_OK


def _predict(model, docs, t: int, beam: int, max_len: int, keys=None) -> list[corpus.Extraction]:
    from .model import beam_extract

    out = []
    cfg = context.LayoutConfig(max_len)
    for doc in docs:
        for s in doc.sentences:
            if keys is not None and (doc.doc_id, s.index) not in keys:
                continue
            ex = context.build_example(doc, context.build_window(doc, s.index, t), None, cfg)
            out.extend(beam_extract(model, ex, beam).extractions)
    return out


def cmd_predict(args) -> int:
    if args.sweep_t and not args.gold:
        raise UsageError("--sweep-t needs --gold to score each window size")
    _require(args.model, args.docs, args.gold)
    from .model import load_model

    model = load_model(args.model)
    docs = corpus.load_documents(args.docs)
    gold = corpus.load_extractions(args.gold, gold=None) if args.gold else None
    keys = {g.key for g in gold} if gold else None
    mode = scorer.MatchMode.parse(args.mode)
    beam = args.beam or model.cfg.beam
    max_len = model.cfg.max_len

    if not args.sweep_t:
        preds = _predict(model, docs, args.t, beam, max_len, keys)
        corpus.save_extractions(preds, args.out)
        if gold is not None and args.report:
            _write_json(scorer.score_extractions(preds, gold, mode).to_dict(), args.report)
        return EXIT_OK

    out = Path(args.out)
    out_dir = Path(args.report_dir) if args.report_dir else out.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for t in args.sweep_t:
        preds = _predict(model, docs, t, beam, max_len, keys)
        corpus.save_extractions(preds, out.with_name(f"{out.stem}_t{t}{out.suffix}"))
        rep = scorer.score_extractions(preds, gold, mode).to_dict()
        rep["t"] = t
        _write_json(rep, out_dir / f"report_t{t}.json")
        summary.append({"t": t, "auc": rep["auc"], "best_f1": rep["best_f1"]})
        log.info("t=%d auc=%.4f f1=%.4f", t, rep["auc"], rep["best_f1"])
    _write_json(summary, out_dir / "sweep.json")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    _require(args.config)
    from .model.gradcheck import grad_check, tiny_case

    with open(args.config, encoding="utf-8") as fh:
        over = json.load(fh)
    extra = over.pop("extra_vocab", 4)
    t = over.pop("t", 1)
    model, ex = tiny_case(over, seed=args.seed, t=t, extra_vocab=extra)
    res = grad_check(model, ex, args.eps)
    report = {"max_rel_error": res.max_rel_error, "worst": res.worst, "per_tensor": res.per_tensor,
              "tolerance": args.tol, "passed": res.max_rel_error <= args.tol}
    if args.report:
        _write_json(report, args.report)
    print(f"max relative error {res.max_rel_error:.3e} ({res.worst})")
    return EXIT_OK if report["passed"] else EXIT_DATA


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctxoie", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default=None, help=f"logging level (default ${LOG_ENV} or WARNING)")
    p.add_argument("--threads", type=_positive, default=None, help="cap on torch worker threads")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    s = sub.add_parser("stats", help="corpus statistics")
    s.add_argument("--docs", required=True)
    s.add_argument("--format", choices=["jsonl", "plain"], default="jsonl")
    s.add_argument("--gold")
    s.add_argument("--report")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("extract", help="pattern-based tuple extraction from tagged input")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--tagged", help="tagged.conll input")
    src.add_argument("--docs", help="documents.jsonl with tags")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("combine", help="main+fallback pseudo-label combination")
    s.add_argument("--main", required=True)
    s.add_argument("--fallback", required=True)
    s.add_argument("--universe", required=True, help="documents.jsonl defining the sentences")
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_combine)

    s = sub.add_parser("score", help="score extractions against gold")
    s.add_argument("--pred", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--mode", choices=["graded", "lenient"], default="graded")
    s.add_argument("--report", default="report.json")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("consistency", help="two-annotator agreement")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--report", default="consistency.json")
    s.set_defaults(func=cmd_consistency)

    s = sub.add_parser("windows", help="build context-window training examples")
    s.add_argument("--docs", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--t", type=_nonneg, default=5)
    s.add_argument("--max-len", type=_positive, default=128)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_windows)

    s = sub.add_parser("train", help="train the model")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=_nonneg)
    s.add_argument("--batch-size", type=_positive)
    s.add_argument("--lr-bottom", type=float)
    s.add_argument("--lr-other", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--max-vocab", type=_positive)
    s.add_argument("--log", help="write per-epoch losses here")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="extract tuples with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--docs", required=True)
    s.add_argument("--t", type=_nonneg, default=5)
    s.add_argument("--beam", type=_positive)
    s.add_argument("--out", required=True)
    s.add_argument("--gold", help="score against these tuples (and predict only their sentences)")
    s.add_argument("--mode", choices=["graded", "lenient"], default="graded")
    s.add_argument("--report")
    s.add_argument("--sweep-t", type=parse_sweep, help="window range a..b; one report per t")
    s.add_argument("--report-dir")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("gradcheck", help="finite-difference gradient check on a tiny model")
    s.add_argument("--config", required=True, help="JSON of ModelConfig overrides")
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("no command given")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    level = args.log_level or os.environ.get(LOG_ENV, "WARNING")
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.threads:
        import torch

        torch.set_num_threads(args.threads)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ctxoie {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"ctxoie {args.command}: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_DATA
    except (corpus.CorpusError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"ctxoie {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
