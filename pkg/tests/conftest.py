import os

import pytest
from hypothesis import HealthCheck, settings

from ctxoie.corpus import Document, Extraction
from ctxoie.synthetic import make_corpus

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def ext(doc="d", sent=0, sub="s", rel="r", obj="o", conf=1.0):
    """Shorthand: slots as space-joined strings."""
    return Extraction(doc, sent, tuple(sub.split()), tuple(rel.split()), tuple(obj.split()), conf)


@pytest.fixture
def small_corpus():
    return make_corpus(n_docs=3, sents_per_doc=(5, 8), seed=7)


@pytest.fixture
def ten_sentence_doc():
    return Document.from_tokens("d", [[f"w{i}", f"x{i}"] for i in range(10)])
