from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

from ..context import BOS, PAD, SPECIAL_TOKENS, UNK, TrainingExample


class Vocab:
    """Token <-> id table with the special tokens at fixed low ids."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate vocabulary entries")
        self.itos = list(tokens)
        self.stoi = {t: k for k, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, tok: str) -> bool:
        return tok in self.stoi

    def id(self, tok: str) -> int:
        return self.stoi.get(tok, self.stoi[UNK])

    def ids(self, toks: Iterable[str]) -> list[int]:
        return [self.id(t) for t in toks]

    @property
    def pad(self) -> int:
        return self.stoi[PAD]

    @property
    def unk(self) -> int:
        return self.stoi[UNK]

    @property
    def bos(self) -> int:
        return self.stoi[BOS]

    @classmethod
    def build(
        cls, examples: Iterable[TrainingExample], max_size: int | None = None, min_count: int = 1
    ) -> "Vocab":
        counts: Counter = Counter()
        for ex in examples:
            counts.update(ex.input)
            counts.update(ex.target)
        for s in SPECIAL_TOKENS:
            counts.pop(s, None)
        ranked = sorted(
            (t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t)
        )
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(SPECIAL_TOKENS))]
        return cls(list(SPECIAL_TOKENS) + ranked)
