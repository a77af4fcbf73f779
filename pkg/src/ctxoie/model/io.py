"""Model files: one JSON document with config, vocabulary and named tensors.

Tensors are stored as nested lists of float64 values. ``json`` writes
floats with their shortest round-tripping repr, so loading reproduces
every weight bit for bit.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import torch

from .config import ModelConfig
from .network import DTYPE, CopyModel
from .vocab import Vocab

FORMAT = "ctxoie-model/1"


def model_to_json(model: CopyModel, extra: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.itos,
        "tensors": {
            name: t.detach().to(DTYPE).tolist() for name, t in model.state_dict().items()
        },
        "meta": extra or {},
    }


def model_from_json(obj: dict) -> CopyModel:
    if obj.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} file")
    cfg = ModelConfig.from_dict(obj["config"])
    model = CopyModel(cfg, Vocab(obj["vocab"]))
    state = {name: torch.tensor(v, dtype=DTYPE) for name, v in obj["tensors"].items()}
    model.load_state_dict(state, strict=True)
    return model


def save_model(model: CopyModel, path: str | Path, extra: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model, extra), fh)
    os.replace(tmp, path)


def load_model(path: str | Path) -> CopyModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
