"""Small synthetic corpora with planted tuples.

Sentences follow ``DET ADJ? N V P? DET ADJ? N [filler]`` with Penn tags,
so the pattern extractor, the combiner and the model can be exercised
end to end without external data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import Document, Extraction

NOUNS = [
    "device", "station", "antenna", "terminal", "vehicle", "sensor", "patient",
    "monitor", "signal", "network", "node", "controller", "battery", "camera",
    "server", "valve", "pump", "display", "module", "route",
]
VERBS = ["sends", "receives", "controls", "includes", "measures", "supports", "detects", "uses"]
PREPS = ["to", "from", "with", "for", "on"]
ADJS = ["cellular", "wireless", "mobile", "remote", "digital", "single", "medical"]
DETS = ["a", "the", "each"]
FILLER = [(",", ","), ("and", "CC"), ("then", "RB"), ("only", "RB")]


@dataclass
class SyntheticCorpus:
    docs: list[Document]
    gold: list[Extraction]


def _np(rng: random.Random, nouns: list[str]) -> tuple[list[str], list[str]]:
    toks, tags = [rng.choice(DETS)], ["DT"]
    if rng.random() < 0.4:
        toks.append(rng.choice(ADJS))
        tags.append("JJ")
    toks.append(rng.choice(nouns))
    tags.append("NN")
    return toks, tags


def make_sentence(rng: random.Random, nouns: list[str] = NOUNS):
    """Tokens, tags and the planted (subject, relation, object) spans."""
    s_toks, s_tags = _np(rng, nouns)
    r_toks, r_tags = [rng.choice(VERBS)], ["VBZ"]
    if rng.random() < 0.4:
        r_toks.append(rng.choice(PREPS))
        r_tags.append("IN" if r_toks[-1] != "to" else "TO")
    o_toks, o_tags = _np(rng, nouns)
    toks = s_toks + r_toks + o_toks
    tags = s_tags + r_tags + o_tags
    if rng.random() < 0.3:
        f_tok, f_tag = rng.choice(FILLER)
        toks.append(f_tok)
        tags.append(f_tag)
    return toks, tags, (tuple(s_toks), tuple(r_toks), tuple(o_toks))


def make_corpus(
    n_docs: int = 4,
    sents_per_doc: tuple[int, int] = (6, 12),
    seed: int = 0,
    domain: str = "synthetic",
) -> SyntheticCorpus:
    rng = random.Random(seed)
    docs, gold = [], []
    for d in range(n_docs):
        doc_id = f"doc{d}"
        # each document talks about a handful of recurring nouns
        topic = rng.sample(NOUNS, 5)
        sents, tags = [], []
        for i in range(rng.randint(*sents_per_doc)):
            toks, tg, (s, r, o) = make_sentence(rng, topic)
            sents.append(toks)
            tags.append(tg)
            gold.append(Extraction(doc_id, i, s, r, o, 1.0))
        docs.append(Document.from_tokens(doc_id, sents, domain, tags))
    return SyntheticCorpus(docs, gold)
