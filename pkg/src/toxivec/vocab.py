"""Vocabulary construction and the unigram^p negative-sampling table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import UsageError
from .normalize import CorpusDocument

DEFAULT_MIN_COUNT = 5
DEFAULT_NS_POWER = 0.75
DEFAULT_NS_TABLE_SIZE = 10_000_000


@dataclass
class Vocabulary:
    """Word <-> dense index map with occurrence counts.

    Indices are assigned by descending frequency, ties broken
    lexicographically, so identical corpora always produce identical
    vocabularies. ``total_tokens`` counts retained-word occurrences only.
    """

    words: list[str]
    count: np.ndarray  # int64, count[i] = f(words[i])
    total_tokens: int
    min_count: int
    index_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index_of = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index_of

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        """Map tokens to indices, dropping out-of-vocabulary tokens."""
        index = self.index_of
        return np.array([index[t] for t in tokens if t in index], dtype=np.int32)

    def frequency(self, word: str) -> float:
        """Relative corpus frequency f(w) / total_tokens."""
        return self.count[self.index_of[word]] / self.total_tokens


@dataclass
class NegativeSamplingTable:
    """Slot array for O(1) draws from the unigram^power noise distribution."""

    slots: np.ndarray  # int32 word indices, len = table size
    power: float

    def __len__(self) -> int:
        return len(self.slots)


def build_vocabulary(corpus: Iterable[CorpusDocument], min_count: int = DEFAULT_MIN_COUNT) -> Vocabulary:
    """Count tokens over the corpus and keep words with f(w) >= min_count."""
    if min_count < 1:
        raise UsageError(f"min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {}
    seen_any = False
    for doc in corpus:
        seen_any = True
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    if not seen_any:
        raise UsageError("empty corpus: no documents to build a vocabulary from")
    retained = sorted(
        ((w, c) for w, c in counts.items() if c >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    if not retained:
        raise UsageError(
            f"empty vocabulary: no word appears at least {min_count} times"
        )
    words = [w for w, _ in retained]
    freq = np.array([c for _, c in retained], dtype=np.int64)
    return Vocabulary(words=words, count=freq, total_tokens=int(freq.sum()), min_count=min_count)


def build_ns_table(
    vocab: Vocabulary,
    power: float = DEFAULT_NS_POWER,
    size: int = DEFAULT_NS_TABLE_SIZE,
) -> NegativeSamplingTable:
    """Fill the noise table by walking the cumulative f(w)^power mass.

    Slot ``a`` holds word ``i`` where ``i`` is the first word whose
    cumulative normalized mass is >= a/size; equivalently the walk
    advances to the next word whenever a/size exceeds the mass
    accumulated so far.
    """
    if power <= 0:
        raise UsageError(f"table power must be > 0, got {power}")
    if size < len(vocab):
        raise UsageError(f"table size {size} smaller than vocabulary {len(vocab)}")
    mass = np.asarray(vocab.count, dtype=np.float64) ** power
    cumulative = np.cumsum(mass / mass.sum())
    boundaries = np.arange(size, dtype=np.float64) / size
    slots = np.searchsorted(cumulative, boundaries, side="left")
    np.clip(slots, 0, len(vocab) - 1, out=slots)
    return NegativeSamplingTable(slots=slots.astype(np.int32), power=power)


def keep_probability(word: str, vocab: Vocabulary, t: float) -> float:
    """Subsampling keep probability: min(1, sqrt(t/phi) + t/phi).

    With t = 0 subsampling is disabled and every occurrence is kept,
    which is the default so frequent stop words stay in the corpus.
    """
    if t < 0:
        raise UsageError(f"subsample threshold must be >= 0, got {t}")
    if word not in vocab:
        raise UsageError(f"word {word!r} not in vocabulary")
    if t == 0:
        return 1.0
    phi = vocab.frequency(word)
    return min(1.0, math.sqrt(t / phi) + t / phi)


def keep_probability_vector(vocab: Vocabulary, t: float) -> np.ndarray:
    """Per-index keep probabilities, vectorized form of keep_probability."""
    if t == 0:
        return np.ones(len(vocab))
    phi = vocab.count / vocab.total_tokens
    return np.minimum(1.0, np.sqrt(t / phi) + t / phi)
