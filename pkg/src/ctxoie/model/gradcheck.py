"""Backprop gradients checked against central finite differences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import torch
from torch.func import functional_call, vmap

from ..context import SPECIAL_TOKENS, LayoutConfig, TrainingExample, build_example, build_window
from .config import ModelConfig
from .network import CopyModel
from .vocab import Vocab

TINY = dict(d_bottom=8, n_bottom=1, d_top=4, ffn=8, n_top=1, n_heads=2, d_dec=6, d_emb_dec=4)


class GradientError(ArithmeticError):
    pass


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float]
    worst: str


def analytic_gradients(model: CopyModel, example: TrainingExample) -> dict[str, torch.Tensor]:
    model.zero_grad()
    loss = model.forward_loss(example)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
        if not torch.isfinite(g).all():
            raise GradientError(f"non-finite gradient for {name}")
        grads[name] = g
    model.zero_grad()
    return grads


@torch.no_grad()
def numeric_gradients(
    model: CopyModel, example: TrainingExample, eps: float = 1e-4, chunk: int = 256
) -> dict[str, torch.Tensor]:
    """Central differences ``(f(p + eps) - f(p - eps)) / 2 eps``, one entry at a time.

    The perturbed forward passes are batched with ``vmap``; each still moves
    exactly one scalar parameter.
    """
    batch = model.make_batch([example])
    params = {k: v.detach() for k, v in model.named_parameters()}
    grads = {}
    for name, p in params.items():

        def loss_at(value, name=name):
            return functional_call(model, {**params, name: value}, (batch,))

        f = vmap(loss_at)
        n = p.numel()
        out = torch.empty(n, dtype=p.dtype)
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            bump = torch.zeros(hi - lo, n, dtype=p.dtype)
            bump[torch.arange(hi - lo), torch.arange(lo, hi)] = eps
            bump = bump.view(hi - lo, *p.shape)
            out[lo:hi] = (f(p + bump) - f(p - bump)) / (2 * eps)
        grads[name] = out.view(p.shape)
    return grads


def relative_error(a: torch.Tensor, n: torch.Tensor) -> float:
    """``|a - n| / max(|a|, |n|, 1e-8)`` with ``|.|`` the tensor 2-norm.

    Whole-tensor norms, because near-zero entries carry an O(eps**2)
    finite-difference truncation error that swamps an elementwise ratio.
    """
    na, nn_ = float(a.norm()), float(n.norm())
    return float((a - n).norm()) / max(na, nn_, 1e-8)


def grad_check(
    model: CopyModel,
    example: TrainingExample,
    eps: float = 1e-4,
    tamper: Callable[[dict[str, torch.Tensor]], None] | None = None,
) -> GradCheckResult:
    """Largest relative error between backprop and finite-difference gradients.

    Each named parameter tensor is compared as a whole. ``tamper`` may edit
    the backprop gradients before comparison (used to test the checker).
    Needs a dropout-free model.
    """
    if model.cfg.dropout and model.training:
        raise ValueError("gradient check needs deterministic forward passes; call model.eval()")
    analytic = analytic_gradients(model, example)
    if tamper is not None:
        tamper(analytic)
    numeric = numeric_gradients(model, example, eps)
    per = {name: relative_error(analytic[name], numeric[name]) for name in analytic}
    worst = max(per, key=per.get)
    if not math.isfinite(per[worst]):
        raise GradientError(f"non-finite comparison for {worst}")
    return GradCheckResult(per[worst], per, worst)


def tiny_case(
    overrides: dict | None = None, seed: int = 0, t: int = 1, extra_vocab: int = 4
) -> tuple[CopyModel, TrainingExample]:
    """A small model and one synthetic example with context, for gradient checks.

    Only ``extra_vocab`` content words enter the vocabulary, so the rest of
    the target can only be reached through the copy path.
    """
    from ..synthetic import make_corpus

    sc = make_corpus(1, (3, 3), seed=seed)
    doc = sc.docs[0]
    gold = next(e for e in sc.gold if e.sent_idx == 1)
    ex = build_example(doc, build_window(doc, 1, t), gold, LayoutConfig(128))
    words = [w for w in dict.fromkeys(ex.input + ex.target) if w not in SPECIAL_TOKENS]
    vocab = Vocab(list(SPECIAL_TOKENS) + words[:extra_vocab])
    base = {**TINY, "max_len": len(ex.input), "seed": seed, **(overrides or {})}
    cfg = ModelConfig.from_dict({**ModelConfig().to_dict(), **base, "vocab_size": len(vocab), "dropout": 0.0})
    return CopyModel(cfg, vocab), ex
