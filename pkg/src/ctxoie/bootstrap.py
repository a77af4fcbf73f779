"""Pseudo-label bootstrapping: combine a main and a fallback extractor.

The combination is per sentence and all-or-nothing: a sentence takes the
main system's tuples when there is at least one, otherwise the fallback's,
otherwise it is left out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (
    CorpusError,
    Document,
    Extraction,
    format_extraction,
    group_by_sentence,
    parse_extraction_row,
)

MAIN = "main"
FALLBACK = "fallback"

SentenceKey = tuple[str, int]


@dataclass
class CombinedLabels:
    tuples: dict[SentenceKey, list[Extraction]] = field(default_factory=dict)
    provenance: dict[SentenceKey, str] = field(default_factory=dict)

    def __post_init__(self):
        for key, exs in self.tuples.items():
            if not exs:
                raise CorpusError(f"sentence {key} has an empty tuple list")
            if self.provenance.get(key) not in (MAIN, FALLBACK):
                raise CorpusError(f"sentence {key} has no provenance")

    def __iter__(self):
        return iter(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)

    def extractions(self) -> list[Extraction]:
        return [ex for key in self.tuples for ex in self.tuples[key]]

    @classmethod
    def from_extractions(
        cls, extractions: Iterable[Extraction], provenance: str = MAIN
    ) -> "CombinedLabels":
        groups = group_by_sentence(extractions)
        return cls(groups, {k: provenance for k in groups})


@dataclass(frozen=True)
class LabelStats:
    n_sent: int
    n_tuple: int
    n_sent_main: int
    n_sent_fallback: int
    n_tuple_main: int
    n_tuple_fallback: int


def sentence_universe(docs: Sequence[Document]) -> list[SentenceKey]:
    return [(d.doc_id, s.index) for d in docs for s in d.sentences]


def combine(
    main: Sequence[Extraction],
    fallback: Sequence[Extraction],
    universe: Sequence[SentenceKey],
) -> CombinedLabels:
    """Per-sentence main-then-fallback combination, in universe order."""
    known = set(universe)
    by_main = group_by_sentence(main)
    by_fb = group_by_sentence(fallback)
    for name, groups in (("main", by_main), ("fallback", by_fb)):
        stray = [k for k in groups if k not in known]
        if stray:
            raise CorpusError(f"{name} extraction refers to sentence {stray[0]} outside the universe")

    tuples: dict[SentenceKey, list[Extraction]] = {}
    prov: dict[SentenceKey, str] = {}
    for key in dict.fromkeys(universe):
        if by_main.get(key):
            tuples[key], prov[key] = list(by_main[key]), MAIN
        elif by_fb.get(key):
            tuples[key], prov[key] = list(by_fb[key]), FALLBACK
    return CombinedLabels(tuples, prov)


def label_stats(labels: CombinedLabels) -> LabelStats:
    n_sent = {MAIN: 0, FALLBACK: 0}
    n_tup = {MAIN: 0, FALLBACK: 0}
    for key, exs in labels.tuples.items():
        p = labels.provenance[key]
        n_sent[p] += 1
        n_tup[p] += len(exs)
    return LabelStats(
        n_sent=len(labels.tuples),
        n_tuple=n_tup[MAIN] + n_tup[FALLBACK],
        n_sent_main=n_sent[MAIN],
        n_sent_fallback=n_sent[FALLBACK],
        n_tuple_main=n_tup[MAIN],
        n_tuple_fallback=n_tup[FALLBACK],
    )


def save_combined(labels: CombinedLabels, path: str | Path) -> None:
    """Extraction TSV with an extra trailing provenance column."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, exs in labels.tuples.items():
            for ex in exs:
                fh.write(format_extraction(ex) + "\t" + labels.provenance[key] + "\n")


def load_combined(path: str | Path) -> CombinedLabels:
    """Read a combined TSV; plain extraction or gold TSVs load as all-main."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    tuples: dict[SentenceKey, list[Extraction]] = {}
    prov: dict[SentenceKey, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), start=1):
        if not line:
            continue
        fields = line.split("\t")
        try:
            if len(fields) == 7:
                ex = parse_extraction_row(fields[:6], True)
                p = fields[6]
                if p not in (MAIN, FALLBACK):
                    raise ValueError(f"bad provenance {p!r}")
            elif len(fields) in (5, 6):
                ex = parse_extraction_row(fields, len(fields) == 6)
                p = MAIN
            else:
                raise ValueError(f"unexpected column count {len(fields)}")
        except ValueError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
        if prov.setdefault(ex.key, p) != p:
            raise CorpusError(f"{path}:{lineno}: mixed provenance for sentence {ex.key}")
        tuples.setdefault(ex.key, []).append(ex)
    return CombinedLabels(tuples, prov)
