from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from ..context import TrainingExample
from .config import ModelConfig, TrainConfig
from .io import save_model
from .network import CopyModel
from .vocab import Vocab

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    n_unk_targets: int = 0


def build_model(
    examples: Sequence[TrainingExample],
    cfg: ModelConfig = ModelConfig(),
    max_vocab: int | None = None,
) -> CopyModel:
    """Fresh model with a vocabulary built from ``examples``."""
    vocab = Vocab.build(examples, max_size=max_vocab)
    return CopyModel(cfg.with_(vocab_size=len(vocab)), vocab)


def make_optimizer(model: CopyModel, tcfg: TrainConfig) -> torch.optim.Adam:
    bottom, other = model.parameter_groups()
    return torch.optim.Adam(
        [
            {"params": bottom, "lr": tcfg.lr_bottom, "name": "bottom"},
            {"params": other, "lr": tcfg.lr_other, "name": "other"},
        ]
    )


def train(
    model: CopyModel,
    dataset: Sequence[TrainingExample],
    tcfg: TrainConfig = TrainConfig(),
    checkpoint: str | Path | None = None,
    until_accuracy: float | None = None,
) -> TrainLog:
    """Mini-batch Adam with separate rates for the bottom encoder and the rest.

    Optionally writes the model to ``checkpoint`` after every epoch and
    stops early once teacher-forced token accuracy reaches ``until_accuracy``.
    """
    if not dataset:
        raise TrainingError("empty dataset")
    torch.manual_seed(tcfg.seed)
    rng = random.Random(tcfg.seed)
    opt = make_optimizer(model, tcfg)
    order = list(range(len(dataset)))
    out = TrainLog()
    model.train()
    for epoch in range(tcfg.epochs):
        if tcfg.shuffle:
            rng.shuffle(order)
        total = 0.0
        n_batches = 0
        for b, start in enumerate(range(0, len(order), tcfg.batch_size)):
            batch = model.make_batch([dataset[i] for i in order[start : start + tcfg.batch_size]])
            out.n_unk_targets += batch.n_unk_targets
            loss = model.batch_loss(batch)
            if not math.isfinite(loss.item()):
                raise TrainingError(f"non-finite loss in epoch {epoch} batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item()
            n_batches += 1
        out.epoch_loss.append(total / n_batches)
        log.info("epoch %d loss %.6f", epoch, out.epoch_loss[-1])
        if checkpoint is not None:
            save_model(model, checkpoint, {"epoch": epoch, "epoch_loss": out.epoch_loss})
        if until_accuracy is not None and model.token_accuracy(dataset) >= until_accuracy:
            break
    model.eval()
    return out
