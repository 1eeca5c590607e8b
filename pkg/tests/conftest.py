"""Shared fixtures: a 60-token source vocabulary with dim-8 embeddings, a
target vocabulary contributing 25 new types, synthetic skipgram vectors, and
the topic-clustered co-occurrence corpus."""

import itertools
import random
import string

import numpy as np
import pytest

from vocab_transplant import rng
from vocab_transplant.tokenizer import DEFAULT_SPECIALS, Vocabulary
from vocab_transplant.transplant import EmbeddingMatrix, align_vocabs
from vocab_transplant.vectors import WordVectors

SRC_UNUSED = [f"[unused-{i}]" for i in range(5)]
SRC_ALPHABET = list("abcdefghij") + ["##" + c for c in "abcdefghij"]
SRC_PIECES = [
    "ab", "cd", "ef", "gh", "ij",
    "##ab", "##cd", "##ef", "##gh", "##ij",
    "abc", "def", "ghi",
    "##abc", "##def", "##ghi",
    "abcd", "efgh",
    "aa", "##aa", "bb", "##bb", "cc", "##cc",
    "dd", "##dd", "ee", "##ee", "ff", "##ff",
]

# 20 types the source tokenizer can segment, 5 it maps to [UNK]
NEW_SEGMENTABLE = [
    "abab", "cdcd", "efef", "ghij", "aabb", "ccdd", "eeff",
    "abcdef", "ghiabc", "defgh", "aaa", "bbb", "ccc", "ddd",
    "eee", "fff", "##abab", "##cdcd", "##aaa", "##bbb",
]
NEW_UNK = ["qq", "zz", "qqq", "abq", "xyz"]
SHARED_SUBSET = ["a", "b", "c", "##a", "##b", "ab", "cd", "##ab", "abc"]


@pytest.fixture(scope="session")
def src_vocab():
    tokens = list(DEFAULT_SPECIALS) + SRC_UNUSED + SRC_ALPHABET + SRC_PIECES
    assert len(tokens) == 60
    return Vocabulary(tokens)


@pytest.fixture(scope="session")
def src_emb(src_vocab):
    rows = rng.uniform_matrix(42, 0, (len(src_vocab), 8), -0.5, 0.5)
    return EmbeddingMatrix(src_vocab, rows)


@pytest.fixture(scope="session")
def tgt_vocab():
    tokens = (
        list(DEFAULT_SPECIALS)
        + SHARED_SUBSET
        + NEW_SEGMENTABLE
        + NEW_UNK
        + ["[unused-0]"]
    )
    return Vocabulary(tokens)


@pytest.fixture(scope="session")
def alignment(src_vocab, tgt_vocab):
    return align_vocabs(src_vocab, tgt_vocab)


@pytest.fixture(scope="session")
def ft_vectors(alignment):
    """Synthetic skipgram vectors (dim 6) covering all shared types and all
    but two of the new types, so projection has fallbacks to exercise."""
    covered_new = sorted(alignment.new - {"xyz", "qqq"})
    words = sorted(alignment.shared) + covered_new
    rows = rng.normal_matrix(77, 0, (len(words), 6))
    return WordVectors(words, rows)


def make_topic_words(n):
    out = []
    for l1, l2 in itertools.combinations(string.ascii_lowercase, 2):
        out.append((l1 + l2) * 2)
        if len(out) == n:
            return out
    raise ValueError("too many words requested")


def topic_corpus(n_lines=2000, n_topics=12, words_per_topic=5, seed=5):
    """Lines drawn from one topic each; the first two words of a topic are
    adjacent in all of its lines (the designed co-occurring pairs)."""
    words = make_topic_words(n_topics * words_per_topic)
    topics = [
        words[t * words_per_topic:(t + 1) * words_per_topic] for t in range(n_topics)
    ]
    rnd = random.Random(seed)
    lines = []
    for i in range(n_lines):
        topic = topics[i % n_topics]
        extras = rnd.sample(topic[2:], 2)
        lines.append(" ".join([topic[0], topic[1]] + extras))
    designed = [(t[0], t[1]) for t in topics]
    return lines, designed


def cosine(vectors: WordVectors, a: str, b: str) -> float:
    x, y = vectors.word_vector(a), vectors.word_vector(b)
    return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))
