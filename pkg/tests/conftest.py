import random

import pytest

from nerfuse.corpus import Corpus, EntitySpan, Sentence


def make_sentence(sid, n_tokens, spans=(), prefix="t"):
    return Sentence(
        id=sid,
        tokens=tuple(f"{prefix}{i}" for i in range(n_tokens)),
        spans=tuple(EntitySpan(*s) for s in spans),
    )


def make_corpus(name, sentence_specs):
    """sentence_specs: list of (n_tokens, [(start, end, label), ...])."""
    sentences = tuple(
        make_sentence(f"{name}:{i}", n, spans) for i, (n, spans) in enumerate(sentence_specs)
    )
    return Corpus(name=name, sentences=sentences)


def random_span_layout(rng, n_tokens, labels, density=0.4):
    """Random non-overlapping spans over n_tokens."""
    spans = []
    i = 0
    while i < n_tokens:
        if rng.random() < density:
            length = rng.randint(1, min(3, n_tokens - i))
            spans.append((i, i + length, rng.choice(labels)))
            i += length + rng.randint(0, 1)
        else:
            i += 1
    return spans


def random_corpus(rng, name, n_sentences=8, labels=("PER", "ORG", "GPE"), max_tokens=12):
    alphabet = ["北", "京", "bank", "é", "x1", "の", "a.b", "Ω"]
    sentences = []
    for i in range(n_sentences):
        n = rng.randint(1, max_tokens)
        tokens = tuple(rng.choice(alphabet) for _ in range(n))
        spans = tuple(EntitySpan(*s) for s in random_span_layout(rng, n, list(labels)))
        sentences.append(Sentence(id=f"{name}:{i}", tokens=tokens, spans=spans))
    return Corpus(name=name, sentences=tuple(sentences))


@pytest.fixture
def rng():
    return random.Random(20240817)
