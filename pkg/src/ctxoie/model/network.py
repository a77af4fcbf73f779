"""Flat source-context encoder with a copy-attention LSTM decoder.

Bottom blocks run self-attention over ``[source; context]`` so source
positions can read the context. Their output is then cut back to the
source block, projected to ``d_top`` and passed through top blocks that
see the source only. The decoder attends over the top-block states and
mixes a vocabulary softmax with a copy distribution over source
positions (pointer-generator style, scalar sigmoid gate).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn
from torch.nn import functional as F

from ..context import TrainingExample
from .config import ModelConfig
from .vocab import Vocab

log = logging.getLogger(__name__)

DTYPE = torch.float64

BOTTOM_PREFIXES = ("tok_emb.", "seg_emb.", "pos_emb.", "bottom.")


class SelfAttention(nn.Module):
    def __init__(self, d: int, n_heads: int, dropout: float = 0.0):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d // n_heads
        self.q = nn.Linear(d, d)
        # a key bias only shifts each query's scores by a constant, which softmax ignores
        self.k = nn.Linear(d, d, bias=False)
        self.v = nn.Linear(d, d)
        self.o = nn.Linear(d, d)
        self.drop = nn.Dropout(dropout)
        self.last_weights: torch.Tensor | None = None

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        # x: (B, L, d); mask: (B, L) True on real positions
        B, L, _ = x.shape

        def heads(t):
            return t.view(B, L, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = heads(self.q(x)), heads(self.k(x)), heads(self.v(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
        w = torch.softmax(scores, dim=-1)
        self.last_weights = w.detach()
        out = (self.drop(w) @ v).transpose(1, 2).reshape(B, L, -1)
        return self.o(out)


class Block(nn.Module):
    """Pre-norm transformer layer."""

    def __init__(self, d: int, ffn: int, n_heads: int, dropout: float = 0.0):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.attn = SelfAttention(d, n_heads, dropout)
        self.ln2 = nn.LayerNorm(d)
        self.ff1 = nn.Linear(d, ffn)
        self.ff2 = nn.Linear(ffn, d)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, mask):
        x = x + self.drop(self.attn(self.ln1(x), mask))
        # tanh GELU is smooth everywhere, which keeps finite-difference checks clean
        h = F.gelu(self.ff1(self.ln2(x)), approximate="tanh")
        return x + self.drop(self.ff2(h))


class Stack(nn.Module):
    def __init__(self, n: int, d: int, ffn: int, n_heads: int, dropout: float = 0.0):
        super().__init__()
        self.blocks = nn.ModuleList(Block(d, ffn, n_heads, dropout) for _ in range(n))
        self.ln_f = nn.LayerNorm(d) if n else None

    def forward(self, x, mask):
        for b in self.blocks:
            x = b(x, mask)
        return self.ln_f(x) if self.ln_f is not None else x


class LSTMCell(nn.Module):
    """Single LSTM step; same parameter layout as ``torch.nn.LSTMCell`` (gates i, f, g, o)."""

    def __init__(self, d_in: int, d_hid: int):
        super().__init__()
        bound = 1.0 / math.sqrt(d_hid)
        self.weight_ih = nn.Parameter(torch.empty(4 * d_hid, d_in).uniform_(-bound, bound))
        self.weight_hh = nn.Parameter(torch.empty(4 * d_hid, d_hid).uniform_(-bound, bound))
        self.bias_ih = nn.Parameter(torch.empty(4 * d_hid).uniform_(-bound, bound))
        self.bias_hh = nn.Parameter(torch.empty(4 * d_hid).uniform_(-bound, bound))

    def forward(self, x, state):
        h, c = state
        z = F.linear(x, self.weight_ih, self.bias_ih) + F.linear(h, self.weight_hh, self.bias_hh)
        i, f, g, o = z.chunk(4, -1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        return torch.sigmoid(o) * torch.tanh(c), c


@dataclass
class EncoderStates:
    h1_full: torch.Tensor  # (B, L, d_bottom)
    h1_src: torch.Tensor  # (B, Ls, d_bottom)
    h2_src: torch.Tensor  # (B, Ls, d_top)
    src_mask: torch.Tensor  # (B, Ls)


@dataclass
class Batch:
    ids: torch.Tensor
    segs: torch.Tensor
    mask: torch.Tensor
    src_len: torch.Tensor
    src_ext: torch.Tensor
    oovs: list[list[str]]
    n_ext: int
    tgt_in: torch.Tensor | None = None
    tgt_out: torch.Tensor | None = None
    tgt_mask: torch.Tensor | None = None
    n_unk_targets: int = 0

    @property
    def size(self) -> int:
        return self.ids.shape[0]


@dataclass
class StepOutput:
    state: tuple[torch.Tensor, torch.Tensor, torch.Tensor]
    p_vocab: torch.Tensor  # (B, V)
    p_copy: torch.Tensor  # (B, Ls) attention over source positions
    gate: torch.Tensor  # (B, 1) weight on the vocabulary distribution
    p_mix: torch.Tensor  # (B, V + n_oov) over surface tokens


class CopyModel(nn.Module):
    def __init__(self, cfg: ModelConfig, vocab: Vocab):
        super().__init__()
        if len(vocab) != cfg.vocab_size:
            raise ValueError(f"config vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}")
        self.cfg = cfg
        self.vocab = vocab
        V = cfg.vocab_size
        g = torch.Generator().manual_seed(cfg.seed)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(cfg.seed)
            self.tok_emb = nn.Embedding(V, cfg.d_bottom)
            self.seg_emb = nn.Embedding(2, cfg.d_bottom)
            self.pos_emb = nn.Embedding(cfg.max_len, cfg.d_bottom)
            self.bottom = Stack(cfg.n_bottom, cfg.d_bottom, cfg.ffn, cfg.n_heads, cfg.dropout)
            self.proj = nn.Linear(cfg.d_bottom, cfg.d_top)
            self.top = Stack(cfg.n_top, cfg.d_top, cfg.ffn, cfg.n_heads, cfg.dropout)
            self.dec_emb = nn.Embedding(V, cfg.d_emb_dec)
            self.cell = LSTMCell(cfg.d_emb_dec + cfg.d_top, cfg.d_dec)
            self.init_h = nn.Linear(cfg.d_top, cfg.d_dec)
            self.init_c = nn.Linear(cfg.d_top, cfg.d_dec)
            self.att_enc = nn.Linear(cfg.d_top, cfg.d_dec, bias=False)
            self.att_dec = nn.Linear(cfg.d_dec, cfg.d_dec)
            self.att_v = nn.Linear(cfg.d_dec, 1, bias=False)
            self.out = nn.Linear(cfg.d_dec + cfg.d_top, V)
            self.gate = nn.Linear(cfg.d_dec + cfg.d_top + cfg.d_emb_dec, 1)
        # embeddings default to N(0, 1); rescale to a fan-in uniform like the linear layers
        for emb in (self.tok_emb, self.seg_emb, self.pos_emb, self.dec_emb):
            bound = 1.0 / math.sqrt(emb.embedding_dim)
            with torch.no_grad():
                emb.weight.copy_(torch.rand(emb.weight.shape, generator=g) * 2 * bound - bound)
        self.to(DTYPE)
        self.gate_override: float | None = None
        self.unk_target_count = 0

    # ------------------------------------------------------------------ params

    def named_tensors(self) -> dict[str, torch.Tensor]:
        return dict(self.named_parameters())

    def parameter_groups(self) -> tuple[list[nn.Parameter], list[nn.Parameter]]:
        """(bottom encoder parameters, everything else)."""
        bottom, other = [], []
        for name, p in self.named_parameters():
            (bottom if name.startswith(BOTTOM_PREFIXES) else other).append(p)
        return bottom, other

    # ------------------------------------------------------------------ batching

    def make_batch(self, examples: Sequence[TrainingExample], with_targets: bool = True) -> Batch:
        V = len(self.vocab)
        B = len(examples)
        L = max(len(ex.input) for ex in examples)
        if L > self.cfg.max_len:
            raise ValueError(f"input length {L} exceeds max_len {self.cfg.max_len}")
        src_lens = [ex.source_block_len for ex in examples]
        Ls = max(src_lens)
        ids = torch.full((B, L), self.vocab.pad, dtype=torch.long)
        segs = torch.zeros((B, L), dtype=torch.long)
        mask = torch.zeros((B, L), dtype=torch.bool)
        src_ext = torch.zeros((B, Ls), dtype=torch.long)
        oovs: list[list[str]] = []
        for b, ex in enumerate(examples):
            n = len(ex.input)
            ids[b, :n] = torch.tensor(self.vocab.ids(ex.input))
            segs[b, :n] = torch.tensor(ex.segment_ids)
            mask[b, :n] = True
            oov: list[str] = []
            for k in range(src_lens[b]):
                tok = ex.input[k]
                if tok in self.vocab:
                    src_ext[b, k] = self.vocab.stoi[tok]
                else:
                    if tok not in oov:
                        oov.append(tok)
                    src_ext[b, k] = V + oov.index(tok)
            oovs.append(oov)
        n_ext = V + max((len(o) for o in oovs), default=0)
        batch = Batch(ids, segs, mask, torch.tensor(src_lens), src_ext, oovs, n_ext)
        if with_targets:
            self._add_targets(batch, examples)
        return batch

    def _add_targets(self, batch: Batch, examples: Sequence[TrainingExample]) -> None:
        V = len(self.vocab)
        T = max(len(ex.target) for ex in examples)
        if T == 0:
            raise ValueError("empty target")
        B = len(examples)
        tgt_in = torch.full((B, T), self.vocab.pad, dtype=torch.long)
        tgt_out = torch.zeros((B, T), dtype=torch.long)
        tgt_mask = torch.zeros((B, T), dtype=torch.bool)
        n_unk = 0
        for b, ex in enumerate(examples):
            out = []
            for tok in ex.target:
                if tok in self.vocab:
                    out.append(self.vocab.stoi[tok])
                elif tok in batch.oovs[b]:
                    out.append(V + batch.oovs[b].index(tok))
                else:
                    out.append(self.vocab.unk)
                    n_unk += 1
            prev = [self.vocab.bos] + [o if o < V else self.vocab.unk for o in out[:-1]]
            n = len(out)
            tgt_out[b, :n] = torch.tensor(out)
            tgt_in[b, :n] = torch.tensor(prev)
            tgt_mask[b, :n] = True
        batch.tgt_in, batch.tgt_out, batch.tgt_mask = tgt_in, tgt_out, tgt_mask
        batch.n_unk_targets = n_unk
        if n_unk:
            log.warning("%d target tokens neither in vocabulary nor source; scored as <unk>", n_unk)

    # ------------------------------------------------------------------ encoder

    def embed_inputs(self, ids: torch.Tensor, segs: torch.Tensor) -> torch.Tensor:
        L = ids.shape[-1]
        if L > self.cfg.max_len:
            raise ValueError(f"input length {L} exceeds max_len {self.cfg.max_len}")
        pos = torch.arange(L)
        return self.tok_emb(ids) + self.seg_emb(segs) + self.pos_emb(pos)

    def encode_bottom(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.bottom(x, mask)

    def encode_top(self, h1_full: torch.Tensor, src_len: torch.Tensor):
        """Keep the source block of ``h1_full``, project, run the top blocks."""
        Ls = int(src_len.max())
        if Ls > h1_full.shape[1]:
            raise ValueError("source block longer than encoder input")
        h1_src = h1_full[:, :Ls]
        src_mask = torch.arange(Ls)[None, :] < src_len[:, None]
        h2 = self.top(self.proj(h1_src), src_mask)
        return h1_src, h2, src_mask

    def encode(self, batch: Batch) -> EncoderStates:
        x = self.embed_inputs(batch.ids, batch.segs)
        h1 = self.encode_bottom(x, batch.mask)
        h1_src, h2, src_mask = self.encode_top(h1, batch.src_len)
        return EncoderStates(h1, h1_src, h2, src_mask)

    # ------------------------------------------------------------------ decoder

    def init_state(self, enc: EncoderStates):
        m = enc.src_mask.to(DTYPE)[..., None]
        pooled = (enc.h2_src * m).sum(1) / m.sum(1)
        h = torch.tanh(self.init_h(pooled))
        c = torch.tanh(self.init_c(pooled))
        ctx = torch.zeros_like(pooled)
        return (h, c, ctx)

    def decode_step(
        self,
        state,
        prev_ids: torch.Tensor,
        h2_src: torch.Tensor,
        src_mask: torch.Tensor,
        src_ext: torch.Tensor,
        n_ext: int,
        enc_proj: torch.Tensor | None = None,
    ) -> StepOutput:
        V = self.cfg.vocab_size
        h, c, ctx = state
        prev = prev_ids.masked_fill(prev_ids >= V, self.vocab.unk)
        emb = self.dec_emb(prev)
        h, c = self.cell(torch.cat([emb, ctx], -1), (h, c))
        if enc_proj is None:
            enc_proj = self.att_enc(h2_src)
        scores = self.att_v(torch.tanh(enc_proj + self.att_dec(h)[:, None, :])).squeeze(-1)
        scores = scores.masked_fill(~src_mask, float("-inf"))
        attn = torch.softmax(scores, -1)
        ctx = (attn[:, :, None] * h2_src).sum(1)
        hc = torch.cat([h, ctx], -1)
        p_vocab = torch.softmax(self.out(hc), -1)
        if self.gate_override is None:
            g = torch.sigmoid(self.gate(torch.cat([hc, emb], -1)))
        else:
            g = torch.full((h.shape[0], 1), float(self.gate_override), dtype=DTYPE)
        gen = g * p_vocab
        if n_ext > V:
            gen = torch.cat([gen, gen.new_zeros(gen.shape[0], n_ext - V)], -1)
        p_mix = gen.scatter_add(1, src_ext, (1 - g) * attn)
        return StepOutput((h, c, ctx), p_vocab, attn, g, p_mix)

    def step_distributions(self, batch: Batch, enc: EncoderStates | None = None):
        """Teacher-forced mixture distributions, one (B, n_ext) tensor per step."""
        enc = enc or self.encode(batch)
        state = self.init_state(enc)
        enc_proj = self.att_enc(enc.h2_src)
        outs = []
        for t in range(batch.tgt_in.shape[1]):
            step = self.decode_step(
                state, batch.tgt_in[:, t], enc.h2_src, enc.src_mask, batch.src_ext,
                batch.n_ext, enc_proj,
            )
            state = step.state
            outs.append(step.p_mix)
        return outs

    def batch_loss(self, batch: Batch) -> torch.Tensor:
        """Mean negative log-likelihood per target token over the batch."""
        self.unk_target_count += batch.n_unk_targets
        dists = self.step_distributions(batch)
        nll = []
        for t, p in enumerate(dists):
            pt = p.gather(1, batch.tgt_out[:, t : t + 1]).squeeze(1)
            nll.append(-torch.log(pt) * batch.tgt_mask[:, t])
        return torch.stack(nll, 1).sum() / batch.tgt_mask.sum()

    def forward_loss(self, example: TrainingExample) -> torch.Tensor:
        if not example.target:
            raise ValueError("empty target")
        return self.batch_loss(self.make_batch([example]))

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.batch_loss(batch)

    @torch.no_grad()
    def token_accuracy(self, examples: Sequence[TrainingExample], batch_size: int = 64) -> float:
        """Fraction of target tokens the teacher-forced argmax gets right."""
        was = self.training
        self.eval()
        right = total = 0
        for k in range(0, len(examples), batch_size):
            batch = self.make_batch(examples[k : k + batch_size])
            for t, p in enumerate(self.step_distributions(batch)):
                m = batch.tgt_mask[:, t]
                right += int(((p.argmax(1) == batch.tgt_out[:, t]) & m).sum())
                total += int(m.sum())
        self.train(was)
        return right / total if total else 0.0

