from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class ModelConfig:
    """Sizes of the source-context encoder and copy decoder.

    Defaults are desk scale. :data:`PAPER_SCALE` records the full-size
    setting (a 12-layer, 768-wide bottom encoder; 256-wide top blocks).
    """

    vocab_size: int = 1000
    d_bottom: int = 64
    n_bottom: int = 2
    d_top: int = 32
    ffn: int = 128
    n_top: int = 2
    n_heads: int = 4
    d_dec: int = 32
    d_emb_dec: int = 16
    max_len: int = 128
    beam: int = 5
    dropout: float = 0.0
    max_decode_len: int = 48
    seed: int = 0

    def __post_init__(self):
        for f in ("vocab_size", "d_bottom", "d_top", "ffn", "n_heads", "d_dec", "d_emb_dec",
                  "max_len", "beam", "max_decode_len"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.n_bottom < 0 or self.n_top < 0:
            raise ValueError("layer counts must be >= 0")
        if self.d_bottom % self.n_heads:
            raise ValueError("d_bottom must be divisible by n_heads")
        if self.n_top and self.d_top % self.n_heads:
            raise ValueError("d_top must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


PAPER_SCALE = ModelConfig(
    vocab_size=30522,
    d_bottom=768,
    n_bottom=12,
    d_top=256,
    ffn=3072,
    n_top=2,
    n_heads=8,
    d_dec=256,
    d_emb_dec=100,
    max_len=512,
)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    lr_bottom: float = 2e-5
    lr_other: float = 1e-4
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.lr_bottom < 0 or self.lr_other < 0:
            raise ValueError("learning rates must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)
