"""Context windows and encoder/decoder training examples.

Encoder input layout::

    <bos> source... <sep> ctx_1... <sep> ctx_2... <sep>
    segment 0 ---------------->|<- segment 1 -------->

Decoder target layout::

    <sub> subject... <rel> relation... <obj> object... <eot>
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .bootstrap import CombinedLabels
from .corpus import CorpusError, Document, Extraction

PAD = "<pad>"
UNK = "<unk>"
BOS = "<bos>"
SEP = "<sep>"
SUB = "<sub>"
REL = "<rel>"
OBJ = "<obj>"
EOT = "<eot>"
SPECIAL_TOKENS = (PAD, UNK, BOS, SEP, SUB, REL, OBJ, EOT)
TUPLE_DELIMITERS = (SUB, REL, OBJ, EOT)

SOURCE_SEGMENT = 0
CONTEXT_SEGMENT = 1


@dataclass(frozen=True)
class LayoutConfig:
    max_len: int = 128

    def __post_init__(self):
        if self.max_len < 3:
            raise ValueError("max_len must be at least 3")


@dataclass(frozen=True)
class ContextWindow:
    doc_id: str
    index: int
    t: int
    context: tuple[int, ...]


@dataclass(frozen=True)
class TrainingExample:
    input: tuple[str, ...]
    segment_ids: tuple[int, ...]
    target: tuple[str, ...]
    copy: tuple[int | None, ...]
    doc_id: str = ""
    sent_idx: int = -1

    @property
    def source_block_len(self) -> int:
        """Length of ``<bos> source <sep>``."""
        return sum(1 for s in self.segment_ids if s == SOURCE_SEGMENT)

    @property
    def source(self) -> tuple[str, ...]:
        return self.input[1 : self.source_block_len - 1]

    def to_json(self) -> dict:
        return {
            "input": list(self.input),
            "segment_ids": list(self.segment_ids),
            "target": list(self.target),
            "copy": list(self.copy),
            "doc_id": self.doc_id,
            "sent_idx": self.sent_idx,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainingExample":
        ex = cls(
            tuple(obj["input"]),
            tuple(int(s) for s in obj["segment_ids"]),
            tuple(obj.get("target", ())),
            tuple(obj.get("copy", ())),
            obj.get("doc_id", ""),
            obj.get("sent_idx", -1),
        )
        if len(ex.input) != len(ex.segment_ids):
            raise CorpusError("input and segment_ids differ in length")
        if len(ex.copy) != len(ex.target):
            raise CorpusError("target and copy differ in length")
        return ex


def build_window(doc: Document, i: int, t: int) -> ContextWindow:
    """Indices of the up-to-``t`` sentences on each side of sentence ``i``."""
    n = len(doc)
    if not 0 <= i < n:
        raise IndexError(f"sentence index {i} out of range for {doc.doc_id} (N={n})")
    if t < 0:
        raise ValueError("window size must be non-negative")
    before = range(max(0, i - t), i)
    after = range(i + 1, min(n - 1, i + t) + 1)
    return ContextWindow(doc.doc_id, i, t, tuple(before) + tuple(after))


def serialize_tuple(ex: Extraction) -> tuple[str, ...]:
    return (SUB, *ex.subject, REL, *ex.relation, OBJ, *ex.object, EOT)


def _drop_order(index: int, context: Sequence[int]) -> list[int]:
    """Order in which whole context sentences are given up.

    Outermost first, alternating sides; the first drop comes from whichever
    side reaches farther from the source (preceding side on a tie).
    """
    left = [c for c in context if c < index]
    right = [c for c in context if c > index]
    order = []
    take_left = bool(left) and (not right or index - left[0] >= right[-1] - index)
    while left or right:
        if take_left and left:
            order.append(left.pop(0))
        elif right:
            order.append(right.pop())
        else:
            order.append(left.pop(0))
        take_left = not take_left
    return order


def encoder_input(
    doc: Document, window: ContextWindow, cfg: LayoutConfig = LayoutConfig()
) -> tuple[tuple[str, ...], tuple[int, ...]]:
    """Tokens and segment ids for one source sentence plus its context."""
    source = doc.sentences[window.index].tokens
    if len(source) > cfg.max_len - 2:
        raise CorpusError(
            f"{doc.doc_id}:{window.index}: source too long ({len(source)} > {cfg.max_len - 2})"
        )
    kept = list(window.context)
    ctx = {c: list(doc.sentences[c].tokens) for c in kept}

    def total() -> int:
        return len(source) + 2 + sum(len(ctx[c]) + 1 for c in kept)

    for c in _drop_order(window.index, window.context):
        if total() <= cfg.max_len or len(kept) == 1:
            break
        kept.remove(c)
    if kept and total() > cfg.max_len:
        last = kept[0]
        room = cfg.max_len - (len(source) + 2) - 1
        if room <= 0:
            kept = []
        else:
            ctx[last] = ctx[last][:room]

    tokens = [BOS, *source, SEP]
    segs = [SOURCE_SEGMENT] * len(tokens)
    for c in kept:
        block = ctx[c] + [SEP]
        tokens += block
        segs += [CONTEXT_SEGMENT] * len(block)
    return tuple(tokens), tuple(segs)


def copy_alignment(input_tokens: Sequence[str], source_block_len: int, target: Sequence[str]):
    """First source position of each target content token, else None."""
    first: dict[str, int] = {}
    for k in range(1, source_block_len - 1):
        first.setdefault(input_tokens[k], k)
    return tuple(None if tok in TUPLE_DELIMITERS else first.get(tok) for tok in target)


def build_example(
    doc: Document,
    window: ContextWindow,
    tuple_: Extraction | None,
    cfg: LayoutConfig = LayoutConfig(),
) -> TrainingExample:
    """Encoder input for ``window`` and, if given, the serialized target tuple."""
    if tuple_ is not None and (tuple_.doc_id, tuple_.sent_idx) != (doc.doc_id, window.index):
        raise CorpusError(f"tuple for {tuple_.key} paired with sentence {window.index}")
    tokens, segs = encoder_input(doc, window, cfg)
    n_src = len(doc.sentences[window.index]) + 2
    target = serialize_tuple(tuple_) if tuple_ is not None else ()
    return TrainingExample(
        tokens, segs, target, copy_alignment(tokens, n_src, target), doc.doc_id, window.index
    )


def build_dataset(
    docs: Sequence[Document],
    labels: CombinedLabels,
    t: int,
    cfg: LayoutConfig = LayoutConfig(),
) -> list[TrainingExample]:
    """One example per (sentence, tuple), ordered by document, sentence, tuple."""
    by_id = {d.doc_id: d for d in docs}
    for key in labels.tuples:
        doc = by_id.get(key[0])
        if doc is None or not 0 <= key[1] < len(doc):
            raise CorpusError(f"labels refer to unknown sentence {key}")
    order = {d.doc_id: k for k, d in enumerate(docs)}
    out = []
    for key in sorted(labels.tuples, key=lambda k: (order[k[0]], k[1])):
        doc = by_id[key[0]]
        window = build_window(doc, key[1], t)
        for ex in labels.tuples[key]:
            try:
                out.append(build_example(doc, window, ex, cfg))
            except CorpusError as exc:
                raise CorpusError(f"sentence {key}: {exc}") from exc
    return out


def save_examples(examples: Iterable[TrainingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")


def load_examples(path: str | Path) -> list[TrainingExample]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            out.append(TrainingExample.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, CorpusError) as exc:
            raise CorpusError(f"{path}:{lineno}: malformed example ({exc})") from exc
    return out
