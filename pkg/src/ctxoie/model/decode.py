"""Beam-search tuple extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import torch

from ..context import EOT, OBJ, REL, SUB, TrainingExample
from ..corpus import Extraction
from .network import CopyModel


@dataclass
class BeamResult:
    extractions: list[Extraction]
    n_malformed: int = 0
    n_unfinished: int = 0
    hypotheses: list[tuple[list[str], float]] = field(default_factory=list)


def parse_tuple(tokens: Sequence[str]) -> tuple[tuple[str, ...], ...] | None:
    """Split ``<sub> s <rel> r <obj> o <eot>`` into slots; None if malformed."""
    toks = list(tokens)
    if not toks or toks[0] != SUB or toks[-1] != EOT:
        return None
    body = toks[1:-1]
    if body.count(REL) != 1 or body.count(OBJ) != 1 or SUB in body or EOT in body:
        return None
    r, o = body.index(REL), body.index(OBJ)
    if not r < o:
        return None
    sub, rel, obj = tuple(body[:r]), tuple(body[r + 1 : o]), tuple(body[o + 1 :])
    if not sub or not rel:
        return None
    return sub, rel, obj


@torch.no_grad()
def beam_search(model: CopyModel, example: TrainingExample, k: int):
    """Length-normalized beam search.

    Returns finished hypotheses as ``(surface tokens, mean log-prob)``
    sorted best first, and the number of beams cut off at the length limit.
    """
    if k < 1:
        raise ValueError("beam size must be >= 1")
    was = model.training
    model.eval()
    try:
        batch = model.make_batch([example], with_targets=False)
        enc = model.encode(batch)
        V = model.cfg.vocab_size
        eot = model.vocab.stoi[EOT]
        oov = batch.oovs[0]

        state = model.init_state(enc)
        enc_proj = model.att_enc(enc.h2_src)
        seqs: list[list[int]] = [[]]
        scores = [0.0]
        prev = torch.tensor([model.vocab.bos])
        finished: list[tuple[list[int], float]] = []

        for _ in range(model.cfg.max_decode_len):
            n = len(seqs)
            step = model.decode_step(
                state, prev, enc.h2_src.expand(n, -1, -1), enc.src_mask.expand(n, -1),
                batch.src_ext.expand(n, -1), batch.n_ext, enc_proj.expand(n, -1, -1),
            )
            logp = torch.log(step.p_mix)
            total = torch.tensor(scores, dtype=logp.dtype)[:, None] + logp
            flat = total.flatten()
            # ties resolve to the lower flat index: earlier beam, then lower token id
            order = torch.sort(-flat, stable=True).indices[:k].tolist()
            new_seqs, new_scores, keep, nxt = [], [], [], []
            for j in order:
                if not math.isfinite(float(flat[j])):
                    continue
                b, tok = divmod(j, flat.shape[0] // n)
                seq = seqs[b] + [tok]
                if tok == eot:
                    finished.append((seq, float(flat[j])))
                else:
                    new_seqs.append(seq)
                    new_scores.append(float(flat[j]))
                    keep.append(b)
                    nxt.append(tok)
            if len(finished) >= k or not new_seqs:
                seqs = new_seqs
                break
            idx = torch.tensor(keep)
            state = tuple(s[idx] for s in step.state)
            prev = torch.tensor(nxt)
            seqs, scores = new_seqs, new_scores
        n_unfinished = len(seqs) if len(finished) < k else 0

        def surface(ids: list[int]) -> list[str]:
            return [model.vocab.itos[i] if i < V else oov[i - V] for i in ids]

        ranked = sorted(
            ((surface(s), lp / len(s)) for s, lp in finished), key=lambda h: -h[1]
        )
        return ranked[:k], n_unfinished
    finally:
        model.train(was)


def beam_extract(
    model: CopyModel,
    example: TrainingExample,
    k: int | None = None,
    doc_id: str | None = None,
    sent_idx: int | None = None,
) -> BeamResult:
    """Tuples for one encoder input, best first, at most ``k`` of them.

    Confidence is ``exp`` of the hypothesis' mean token log-probability.
    Malformed hypotheses are dropped; duplicate tuples keep their best
    confidence.
    """
    k = model.cfg.beam if k is None else k
    doc_id = example.doc_id if doc_id is None else doc_id
    sent_idx = example.sent_idx if sent_idx is None else sent_idx
    hyps, n_unfinished = beam_search(model, example, k)
    best: dict[tuple, float] = {}
    n_bad = 0
    for toks, score in hyps:
        slots = parse_tuple(toks)
        if slots is None:
            n_bad += 1
            continue
        conf = min(1.0, math.exp(score))
        if conf > best.get(slots, -1.0):
            best[slots] = conf
    exs = [
        Extraction(doc_id, sent_idx, s, r, o, c)
        for (s, r, o), c in sorted(best.items(), key=lambda kv: -kv[1])
    ]
    return BeamResult(exs, n_bad, n_unfinished, hyps)
