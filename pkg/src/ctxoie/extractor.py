"""Rule-based tuple extractor over POS tags.

A small stand-in for verb-phrase-pattern OpenIE systems. It needs
pre-tagged input (Penn Treebank tags) and produces low-precision pseudo
labels; it makes no attempt to match any published system.

Coarse classes::

    VB*            -> V        IN, TO, RP      -> P
    NN*, PRP, CD   -> N        DT              -> DET
    JJ*            -> ADJ      RB*, MD         -> W
    anything else  -> OTHER

A relation is a longest match of ``W* V (W* P)?`` scanned left to right;
touching matches are merged, so verb chains like ``has been used`` form
one relation. Arguments are noun phrases ``DET? ADJ* N+``.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from .corpus import Extraction, Sentence

V, W, P, N, DET, ADJ, OTHER = "V", "W", "P", "N", "DET", "ADJ", "OTHER"
COARSE_CLASSES = (V, W, P, N, DET, ADJ, OTHER)

_EXACT = {
    "IN": P, "TO": P, "RP": P,
    "PRP": N, "CD": N,
    "DT": DET,
    "MD": W,
}
_PREFIX = (("VB", V), ("NN", N), ("JJ", ADJ), ("RB", W))

# one character per coarse class, for regex matching over tag strings
_CHAR = {V: "v", W: "w", P: "p", N: "n", DET: "d", ADJ: "a", OTHER: "o"}
RELATION_REGEX = "w*v(?:w*p)?"
NOUN_PHRASE_REGEX = "d?a*n+"
_NP = re.compile(NOUN_PHRASE_REGEX)

BASE_CONFIDENCE = 0.5
BOTH_ARGS_BONUS = 0.1


def coarse_tag(tags: Iterable[str]) -> list[str]:
    out = []
    for tag in tags:
        cls = _EXACT.get(tag)
        if cls is None:
            cls = next((c for pre, c in _PREFIX if tag.startswith(pre)), OTHER)
        out.append(cls)
    return out


def _encode(classes: Sequence[str]) -> str:
    return "".join(_CHAR[c] for c in classes)


# DFA for W* V (W* P)?  states: 0 start, 1 after V (accept), 2 W after V, 3 after P (accept)
_DFA = {
    (0, W): 0, (0, V): 1,
    (1, W): 2, (1, P): 3,
    (2, W): 2, (2, P): 3,
}
_ACCEPT = {1, 3}


class RelationPattern:
    """Longest-match scanner for relation spans over coarse classes."""

    def __init__(self, merge_adjacent: bool = True):
        self.merge_adjacent = merge_adjacent

    def longest_match(self, classes: Sequence[str], start: int) -> int | None:
        """End (exclusive) of the longest match starting at ``start``."""
        state, best = 0, None
        for k in range(start, len(classes)):
            state = _DFA.get((state, classes[k]))
            if state is None:
                break
            if state in _ACCEPT:
                best = k + 1
        return best

    def spans(self, classes: Sequence[str]) -> list[tuple[int, int]]:
        found: list[tuple[int, int]] = []
        k = 0
        while k < len(classes):
            end = self.longest_match(classes, k)
            if end is None:
                k += 1
                continue
            if self.merge_adjacent and found and found[-1][1] == k:
                found[-1] = (found[-1][0], end)
            else:
                found.append((k, end))
            k = end
        return found


_PATTERN = RelationPattern()


def noun_phrases(classes: Sequence[str]) -> list[tuple[int, int]]:
    return [m.span() for m in _NP.finditer(_encode(classes))]


def extract_sentence(sentence: Sentence, pattern: RelationPattern = _PATTERN) -> list[Extraction]:
    if sentence.tags is None:
        raise ValueError(f"{sentence.doc_id}:{sentence.index}: sentence is not tagged")
    classes = coarse_tag(sentence.tags)
    nps = noun_phrases(classes)
    toks = sentence.tokens
    out = []
    for rs, re_ in pattern.spans(classes):
        left = [np for np in nps if np[1] <= rs]
        right = [np for np in nps if np[0] >= re_]
        if not left:
            # no subject, no tuple
            continue
        ss, se = left[-1]
        obj: tuple[str, ...] = ()
        conf = BASE_CONFIDENCE
        if right:
            os_, oe = right[0]
            obj = toks[os_:oe]
            conf += BOTH_ARGS_BONUS
        out.append(
            Extraction(
                sentence.doc_id,
                sentence.index,
                toks[ss:se],
                toks[rs:re_],
                obj,
                min(conf, 1.0),
            )
        )
    return out


def extract_all(sentences: Iterable[Sentence]) -> list[Extraction]:
    out: list[Extraction] = []
    for s in sentences:
        out.extend(extract_sentence(s))
    return out
