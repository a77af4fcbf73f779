"""Documents, extractions and their on-disk formats.

Tokens are whatever the input file says they are: a token is a
whitespace-delimited unit (plain files) or a JSON string (jsonl files).
Nothing here re-tokenizes. All text is NFC-normalized on load.
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence


class CorpusError(ValueError):
    """Raised for malformed corpus, annotation or extraction data."""


def nfc(token: str) -> str:
    return unicodedata.normalize("NFC", token)


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    tokens: tuple[str, ...]
    tags: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError(f"{self.doc_id}:{self.index}: sentence has no tokens")
        if any(not t for t in self.tokens):
            raise CorpusError(f"{self.doc_id}:{self.index}: empty token")
        if self.tags is not None and len(self.tags) != len(self.tokens):
            raise CorpusError(
                f"{self.doc_id}:{self.index}: {len(self.tags)} tags for {len(self.tokens)} tokens"
            )

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    doc_id: str
    domain: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError(f"{self.doc_id}: empty document")
        for k, s in enumerate(self.sentences):
            if s.index != k or s.doc_id != self.doc_id:
                raise CorpusError(f"{self.doc_id}: sentence {k} has index {s.index}")

    def __len__(self) -> int:
        return len(self.sentences)

    @classmethod
    def from_tokens(
        cls,
        doc_id: str,
        sentences: Sequence[Sequence[str]],
        domain: str = "",
        tags: Sequence[Sequence[str]] | None = None,
    ) -> "Document":
        if tags is not None and len(tags) != len(sentences):
            raise CorpusError(f"{doc_id}: {len(tags)} tag rows for {len(sentences)} sentences")
        sents = tuple(
            Sentence(
                doc_id,
                k,
                tuple(nfc(t) for t in toks),
                None if tags is None else tuple(tags[k]),
            )
            for k, toks in enumerate(sentences)
        )
        return cls(doc_id, domain, sents)


@dataclass(frozen=True)
class Extraction:
    """A (subject; relation; object) triple anchored to one sentence."""

    doc_id: str
    sent_idx: int
    subject: tuple[str, ...]
    relation: tuple[str, ...]
    object: tuple[str, ...] = ()
    confidence: float = 1.0

    def __post_init__(self):
        if not self.subject:
            raise CorpusError(f"{self.doc_id}:{self.sent_idx}: empty subject")
        if not self.relation:
            raise CorpusError(f"{self.doc_id}:{self.sent_idx}: empty relation")
        if not (0.0 <= self.confidence <= 1.0) or math.isnan(self.confidence):
            raise CorpusError(
                f"{self.doc_id}:{self.sent_idx}: confidence {self.confidence} outside [0, 1]"
            )

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sent_idx)

    @property
    def slots(self) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
        return (self.subject, self.relation, self.object)


@dataclass(frozen=True)
class MetricSummary:
    average: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "MetricSummary | None":
        if not values:
            return None
        return cls(fmean(values), min(values), max(values))


@dataclass(frozen=True)
class CorpusStats:
    n_doc: int
    n_sent: int
    n_tuple: int
    n_sent_total: int
    metrics: dict[str, MetricSummary | None] = field(default_factory=dict)

    def to_dict(self, ndigits: int | None = None) -> dict:
        def fmt(x: float) -> float:
            return round(x, ndigits) if ndigits is not None else x

        return {
            "n_doc": self.n_doc,
            "n_sent": self.n_sent,
            "n_tuple": self.n_tuple,
            "n_sent_total": self.n_sent_total,
            "metrics": {
                name: None
                if m is None
                else {"average": fmt(m.average), "min": m.min, "max": m.max}
                for name, m in self.metrics.items()
            },
        }


# --------------------------------------------------------------------------
# documents


def _read_lines(path: Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").split("\n")


def load_documents(path: str | Path, format: str = "jsonl") -> list[Document]:
    """Read documents from ``jsonl`` (one document per line) or ``plain``.

    The plain format holds one pre-tokenized sentence per line; a blank
    line ends a document. Plain documents are named ``doc0``, ``doc1``...
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if format == "jsonl":
        return _load_jsonl(path)
    if format == "plain":
        return _load_plain(path)
    raise ValueError(f"unknown document format {format!r}")


def _load_jsonl(path: Path) -> list[Document]:
    docs = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc_id = str(obj["doc_id"])
            sentences = obj["sentences"]
            tags = obj.get("tags")
            domain = str(obj.get("domain", ""))
            if not isinstance(sentences, list) or not all(
                isinstance(s, list) and all(isinstance(t, str) for t in s) for s in sentences
            ):
                raise TypeError("sentences must be a list of token lists")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: malformed document line ({exc})") from exc
        if not sentences:
            raise CorpusError(f"{path}:{lineno}: empty document {doc_id!r}")
        try:
            docs.append(Document.from_tokens(doc_id, sentences, domain, tags))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return docs


def _load_plain(path: Path) -> list[Document]:
    docs: list[Document] = []
    block: list[list[str]] = []
    for line in _read_lines(path) + [""]:
        toks = line.split()
        if toks:
            block.append(toks)
        elif block:
            docs.append(Document.from_tokens(f"doc{len(docs)}", block))
            block = []
    return docs


def save_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            obj = {
                "doc_id": doc.doc_id,
                "domain": doc.domain,
                "sentences": [list(s.tokens) for s in doc.sentences],
            }
            if all(s.tags is not None for s in doc.sentences):
                obj["tags"] = [list(s.tags) for s in doc.sentences]
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_tagged_conll(path: str | Path) -> list[Sentence]:
    """Read ``token<TAB>tag`` lines grouped under ``# doc=<id> sent=<idx>`` headers."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    out: list[Sentence] = []
    header: tuple[str, int] | None = None
    toks: list[str] = []
    tags: list[str] = []

    def flush(lineno: int) -> None:
        nonlocal header, toks, tags
        if header is None and toks:
            raise CorpusError(f"{path}:{lineno}: sentence without '# doc=... sent=...' header")
        if header is not None:
            if not toks:
                raise CorpusError(f"{path}:{lineno}: empty sentence {header}")
            out.append(Sentence(header[0], header[1], tuple(toks), tuple(tags)))
        header, toks, tags = None, [], []

    lines = _read_lines(path)
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            flush(lineno)
            fields = dict(kv.split("=", 1) for kv in line[1:].split() if "=" in kv)
            try:
                header = (fields["doc"], int(fields["sent"]))
            except (KeyError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad header {line!r}") from exc
        elif not line.strip():
            flush(lineno)
        else:
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise CorpusError(f"{path}:{lineno}: expected 'token<TAB>tag'")
            toks.append(nfc(parts[0]))
            tags.append(parts[1])
    flush(len(lines))
    return out


def save_tagged_conll(sentences: Iterable[Sentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            if s.tags is None:
                raise CorpusError(f"{s.doc_id}:{s.index}: sentence has no tags")
            fh.write(f"# doc={s.doc_id} sent={s.index}\n")
            for tok, tag in zip(s.tokens, s.tags):
                fh.write(f"{tok}\t{tag}\n")
            fh.write("\n")


# --------------------------------------------------------------------------
# extractions


def _split_slot(text: str) -> tuple[str, ...]:
    return tuple(nfc(t) for t in text.split(" ") if t)


def parse_extraction_row(fields: Sequence[str], has_confidence: bool) -> Extraction:
    if has_confidence:
        doc_id, sent_idx, conf, sub, rel, obj = fields
        confidence = float(conf)
    else:
        doc_id, sent_idx, sub, rel, obj = fields
        confidence = 1.0
    return Extraction(
        doc_id, int(sent_idx), _split_slot(sub), _split_slot(rel), _split_slot(obj), confidence
    )


def load_extractions(path: str | Path, gold: bool | None = None) -> list[Extraction]:
    """Read an extraction TSV.

    Rows are ``doc_id, sent_idx, confidence, subject, relation, object``;
    gold files drop the confidence column (confidence 1.0). A trailing
    provenance column, as written by :func:`save_combined`, is ignored.
    ``gold=None`` picks the layout from the column count.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line:
            continue
        fields = line.split("\t")
        n = len(fields)
        if gold is None:
            has_conf = n in (6, 7)
            ok = n in (5, 6, 7)
        else:
            has_conf = not gold
            ok = n in ((5,) if gold else (6, 7))
        if not ok:
            raise CorpusError(f"{path}:{lineno}: unexpected column count {n}")
        try:
            out.append(parse_extraction_row(fields[: 6 if has_conf else 5], has_conf))
        except ValueError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return out


def format_extraction(ex: Extraction, with_confidence: bool = True) -> str:
    cols = [ex.doc_id, str(ex.sent_idx)]
    if with_confidence:
        cols.append(repr(float(ex.confidence)))
    cols += [" ".join(ex.subject), " ".join(ex.relation), " ".join(ex.object)]
    return "\t".join(cols)


def save_extractions(
    extractions: Iterable[Extraction], path: str | Path, gold: bool = False
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in extractions:
            fh.write(format_extraction(ex, with_confidence=not gold) + "\n")


def group_by_sentence(
    extractions: Iterable[Extraction],
) -> dict[tuple[str, int], list[Extraction]]:
    groups: dict[tuple[str, int], list[Extraction]] = {}
    for ex in extractions:
        groups.setdefault(ex.key, []).append(ex)
    return groups


# --------------------------------------------------------------------------
# statistics


def corpus_stats(docs: Sequence[Document], gold: Sequence[Extraction] = ()) -> CorpusStats:
    """Dataset statistics in the layout of an evaluation-set summary table.

    When gold tuples are given, the sentence population (``n_sent``,
    ``L_sent``, ``N_tuple``) is the set of annotated sentences, i.e. those
    with at least one gold tuple. ``N_sent_per_doc`` always counts every
    sentence of every document.
    """
    if not docs:
        raise CorpusError("no documents")
    index = {(d.doc_id, s.index): s for d in docs for s in d.sentences}
    per_sent = group_by_sentence(gold)
    for key in per_sent:
        if key not in index:
            raise CorpusError(f"gold tuple refers to unknown sentence {key}")

    if gold:
        population = [index[k] for k in index if k in per_sent]
    else:
        population = list(index.values())

    metrics = {
        "N_sent_per_doc": MetricSummary.of([len(d) for d in docs]),
        "L_sent": MetricSummary.of([len(s) for s in population]),
        "N_tuple": MetricSummary.of([len(v) for v in per_sent.values()]),
        "L_sub": MetricSummary.of([len(e.subject) for e in gold]),
        "L_rel": MetricSummary.of([len(e.relation) for e in gold]),
        "L_obj": MetricSummary.of([len(e.object) for e in gold]),
    }
    return CorpusStats(
        n_doc=len(docs),
        n_sent=len(population),
        n_tuple=len(gold),
        n_sent_total=len(index),
        metrics=metrics,
    )
