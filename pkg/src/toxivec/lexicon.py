"""Bootstrap and iteratively expand a pejorative-term lexicon.

Two candidate sources: nearest neighbors of existing lexicon terms
inside the embedding model, and scans of external message streams for
unknown words that co-occur with lexicon terms. A human (or
``--accept-all``) then merges reviewed candidates back in.

A term counts as "unknown" in an external message when it is not in the
lexicon and is either absent from the model vocabulary or sits close to
the centroid of the lexicon's vectors; ordinary in-vocabulary words far
from that centroid are filtered out.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataFormatError, UsageError
from .model_io import EmbeddingModel
from .normalize import normalize_text, tokenize
from .query import most_similar

log = logging.getLogger(__name__)

PROVENANCE_SEED = "seed"
PROVENANCE_NEIGHBOR = "neighbor"
PROVENANCE_EXTERNAL = "external"
_PROVENANCES = (PROVENANCE_SEED, PROVENANCE_NEIGHBOR, PROVENANCE_EXTERNAL)

DEFAULT_NEIGHBOR_THRESHOLD = 0.7
DEFAULT_EXTERNAL_THRESHOLD = 0.5
MAX_SAMPLE_CONTEXTS = 3
_EXCERPT_CHARS = 160


def _check_term(term: str) -> str:
    if tokenize(term) != [term]:
        raise UsageError(f"{term!r} is not a single normalized token")
    return term


@dataclass(frozen=True)
class LexiconEntry:
    provenance: str
    score: float | None = None
    first_seen: float = 0.0


@dataclass
class Lexicon:
    entries: dict[str, LexiconEntry] = field(default_factory=dict)

    @classmethod
    def from_seeds(cls, terms: Iterable[str], now: float | None = None) -> "Lexicon":
        stamp = time.time() if now is None else now
        lexicon = cls()
        for term in terms:
            lexicon.entries[_check_term(term)] = LexiconEntry(PROVENANCE_SEED, None, stamp)
        return lexicon

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, term: str) -> bool:
        return term in self.entries

    def terms(self) -> list[str]:
        return list(self.entries)

    def copy(self) -> "Lexicon":
        return Lexicon(entries=dict(self.entries))


@dataclass
class CandidateTerm:
    term: str
    evidence_count: int
    source: str  # neighbor | external
    score: float | None = None
    sample_contexts: list[str] = field(default_factory=list)


def expand_by_neighbors(
    lexicon: Lexicon,
    model: EmbeddingModel,
    threshold: float = DEFAULT_NEIGHBOR_THRESHOLD,
    per_term: int = 10,
) -> list[CandidateTerm]:
    """Collect unseen words scoring >= threshold among each lexicon term's
    top `per_term` neighbors; duplicates merge, evidence counts sum."""
    if not 0 < threshold <= 1:
        raise UsageError(f"threshold must be in (0, 1], got {threshold}")
    anchors = [term for term in lexicon.entries if term in model]
    if not anchors:
        raise UsageError("no lexicon term is present in the model vocabulary")
    merged: dict[str, CandidateTerm] = {}
    for term in anchors:
        for neighbor in most_similar(term, per_term, model):
            if neighbor.score < threshold or neighbor.word in lexicon:
                continue
            found = merged.get(neighbor.word)
            if found is None:
                merged[neighbor.word] = CandidateTerm(
                    term=neighbor.word, evidence_count=1,
                    source=PROVENANCE_NEIGHBOR, score=neighbor.score,
                )
            else:
                found.evidence_count += 1
                found.score = max(found.score, neighbor.score)
    return sorted(merged.values(), key=lambda c: (-c.evidence_count, c.term))


def _lexicon_centroid(lexicon: Lexicon, model: EmbeddingModel) -> np.ndarray | None:
    rows = [model.index_of[t] for t in lexicon.entries if t in model]
    if not rows:
        return None
    mean = model.vectors[rows].astype(np.float64).mean(axis=0)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else None


def scan_external(
    messages: Iterable[str],
    lexicon: Lexicon,
    model: EmbeddingModel,
    threshold: float = DEFAULT_EXTERNAL_THRESHOLD,
) -> list[CandidateTerm]:
    """Scan raw messages that mention a lexicon term for unknown co-occurring words.

    Each message is normalized with the standard pipeline first. A
    qualifying word updates its candidate once per message and keeps up
    to three message excerpts as review context.
    """
    centroid = _lexicon_centroid(lexicon, model)
    units = model.unit_vectors()
    merged: dict[str, CandidateTerm] = {}
    for raw in messages:
        tokens = normalize_text(raw)
        if not any(t in lexicon for t in tokens):
            continue
        excerpt = " ".join(raw.split())[:_EXCERPT_CHARS]
        for token in dict.fromkeys(tokens):  # distinct, first-seen order
            if token in lexicon:
                continue
            row = model.index_of.get(token)
            if row is not None:
                if centroid is None:
                    continue
                if float(units[row] @ centroid) < threshold:
                    continue
            found = merged.get(token)
            if found is None:
                merged[token] = CandidateTerm(
                    term=token, evidence_count=1,
                    source=PROVENANCE_EXTERNAL, sample_contexts=[excerpt],
                )
            else:
                found.evidence_count += 1
                if len(found.sample_contexts) < MAX_SAMPLE_CONTEXTS:
                    found.sample_contexts.append(excerpt)
    return sorted(merged.values(), key=lambda c: (-c.evidence_count, c.term))


def review_merge(
    lexicon: Lexicon, accepted: Iterable[CandidateTerm], now: float | None = None
) -> Lexicon:
    """Return a new lexicon with the accepted candidates added.

    The input lexicon is left untouched; accepting a term that is
    already present warns and changes nothing.
    """
    stamp = time.time() if now is None else now
    updated = lexicon.copy()
    for candidate in accepted:
        if candidate.term in updated:
            log.warning("term %r already in the lexicon; ignored", candidate.term)
            continue
        updated.entries[_check_term(candidate.term)] = LexiconEntry(
            provenance=candidate.source, score=candidate.score, first_seen=stamp,
        )
    return updated


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a JSON-lines lexicon: one {term, provenance, score, first_seen} per line."""
    lexicon = Lexicon()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                term = record["term"]
                provenance = record["provenance"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}: bad lexicon record at line {lineno}: {exc}", line=lineno) from None
            if provenance not in _PROVENANCES:
                raise DataFormatError(
                    f"{path}: unknown provenance {provenance!r} at line {lineno}", line=lineno
                )
            if term in lexicon:
                raise DataFormatError(f"{path}: duplicate term {term!r} at line {lineno}", line=lineno)
            lexicon.entries[term] = LexiconEntry(
                provenance=provenance,
                score=record.get("score"),
                first_seen=float(record.get("first_seen", 0.0)),
            )
    return lexicon


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for term, entry in lexicon.entries.items():
            handle.write(json.dumps(
                {"term": term, "provenance": entry.provenance,
                 "score": entry.score, "first_seen": entry.first_seen},
                ensure_ascii=False,
            ))
            handle.write("\n")
