"""Cosine nearest-neighbor queries over an embedding model.

Search is an exact linear scan over all rows: vocabulary sizes in this
domain stay small enough that reproducibility is worth more than an
approximate index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OOVError
from .model_io import EmbeddingModel


@dataclass(frozen=True)
class Neighbor:
    word: str
    score: float
    rounded: float  # 2-decimal display value; comparisons use `score`


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; errors on zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    value = float(a @ b / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


def _ranked(model: EmbeddingModel, query_unit: np.ndarray, n: int, exclude: int | None) -> list[Neighbor]:
    scores = model.unit_vectors() @ query_unit
    np.clip(scores, -1.0, 1.0, out=scores)
    # Stable sort on negated scores: descending score, ties by vocab index.
    order = np.argsort(-scores, kind="stable")
    if exclude is not None:
        order = order[order != exclude]
    top = order[: max(n, 0)]
    return [Neighbor(model.words[i], float(scores[i]), round(float(scores[i]), 2)) for i in top]


def most_similar(word: str, n: int, model: EmbeddingModel) -> list[Neighbor]:
    """Top-n neighbors of a vocabulary word, the word itself excluded."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    row = model.index_of.get(word)
    if row is None:
        raise OOVError(word, suggest_spellings(word, model))
    unit = model.unit_vectors()[row]
    if not unit.any():
        raise ValueError(f"word {word!r} has a zero vector; similarity undefined")
    return _ranked(model, unit, n, exclude=row)


def nearest_to_vector(v: np.ndarray, n: int, model: EmbeddingModel) -> list[Neighbor]:
    """Top-n rows nearest an arbitrary query vector (no self-exclusion)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return _ranked(model, v / norm, n, exclude=None)


def suggest_spellings(word: str, model: EmbeddingModel, max_distance: int = 2, limit: int = 8) -> list[str]:
    """Vocabulary words within a small edit distance, for OOV error messages."""
    scored: list[tuple[int, int, str]] = []
    for index, candidate in enumerate(model.words):
        if abs(len(candidate) - len(word)) > max_distance:
            continue
        distance = _edit_distance_capped(word, candidate, max_distance)
        if distance is not None:
            scored.append((distance, index, candidate))
    scored.sort()
    return [candidate for _, _, candidate in scored[:limit]]


def _edit_distance_capped(a: str, b: str, cap: int) -> int | None:
    """Levenshtein distance if <= cap, else None (banded DP, early abandon)."""
    if a == b:
        return 0
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        best = i
        for j, ch_b in enumerate(b, start=1):
            cost = 0 if ch_a == ch_b else 1
            value = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            current.append(value)
            best = min(best, value)
        if best > cap:
            return None
        previous = current
    return previous[-1] if previous[-1] <= cap else None
