"""Train CBOW embeddings with negative sampling.

The model predicts a word from the mean of its context vectors inside a
+-window radius. Each position pits the true word against k noise words
drawn from the unigram^0.75 table; parameters move by plain SGD with a
linearly decaying learning rate.

With workers=1 training is strictly deterministic (same corpus, config
and seed give bitwise-identical matrices). With workers > 1 the weight
matrices are shared and updated without locks: concurrent read-modify-
write races lose the occasional update by design, so multi-worker runs
are not reproducible.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import TrainingDivergedError, UsageError
from .normalize import CorpusDocument, read_corpus
from .vocab import NegativeSamplingTable, Vocabulary, keep_probability_vector

log = logging.getLogger(__name__)

ALPHA_FLOOR_RATIO = 1e-4     # learning rate never drops below alpha * this
MAX_NEGATIVE_DRAWS = 10      # tries per negative before giving up on it
_CHUNK_TOKEN_BUDGET = 250_000
_PROGRESS_EVERY = 1_000_000  # tokens between progress lines


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 150
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    alpha: float = 0.025
    subsample: float = 0.0
    seed: int = 1
    workers: int = 1
    dynamic_window: bool = False

    def validate(self) -> "TrainConfig":
        checks = [
            (self.dim >= 1, f"dim must be >= 1, got {self.dim}"),
            (self.window >= 1, f"window must be >= 1, got {self.window}"),
            (self.negatives >= 1, f"negatives must be >= 1, got {self.negatives}"),
            (self.epochs >= 1, f"epochs must be >= 1, got {self.epochs}"),
            (self.alpha > 0, f"alpha must be > 0, got {self.alpha}"),
            (self.subsample >= 0, f"subsample must be >= 0, got {self.subsample}"),
            (self.workers >= 1, f"workers must be >= 1, got {self.workers}"),
        ]
        for ok, message in checks:
            if not ok:
                raise UsageError(message)
        return self


@dataclass
class ModelParameters:
    """Learnable state: input vectors (the published embeddings) + output vectors."""

    w_in: np.ndarray   # (V, D) float64
    w_out: np.ndarray  # (V, D) float64
    processed_tokens: int = 0
    alpha: float = 0.0


@dataclass
class TrainResult:
    params: ModelParameters
    epoch_losses: list[float]  # mean per-position loss, one entry per epoch
    duration_s: float
    engine: str


def init_parameters(vocab: Vocabulary, config: TrainConfig) -> ModelParameters:
    """Seeded init: w_in uniform in [-0.5/D, 0.5/D], w_out all zeros."""
    rng = np.random.default_rng(config.seed)
    w_in = (rng.random((len(vocab), config.dim)) - 0.5) / config.dim
    w_out = np.zeros((len(vocab), config.dim))
    return ModelParameters(w_in=w_in, w_out=w_out, alpha=config.alpha)


def ns_loss(h: np.ndarray, target: int, negatives: Sequence[int], params: ModelParameters) -> float:
    """Negative-sampling loss at one position for a given hidden vector.

    -log sigmoid(w_out[target] . h) - sum_j log sigmoid(-w_out[neg_j] . h),
    with logits clamped to +-30 before exponentiation.
    """
    samples = np.concatenate(([target], np.asarray(negatives, dtype=np.int64)))
    x = np.clip(params.w_out[samples] @ np.asarray(h, dtype=np.float64),
                -_kernels.MAX_EXP, _kernels.MAX_EXP)
    return float(np.log1p(np.exp(-x[0])) + np.sum(np.log1p(np.exp(x[1:]))))


def ns_loss_gradients(
    h: np.ndarray, target: int, negatives: Sequence[int], params: ModelParameters
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss plus analytic gradients w.r.t. h and each touched output row.

    Returns (loss, grad_h, rows, grad_rows): `rows` holds the unique
    sample indices and grad_rows[i] is dL/d w_out[rows[i]], with
    duplicate negatives accumulated.
    """
    h = np.asarray(h, dtype=np.float64)
    samples = np.concatenate(([target], np.asarray(negatives, dtype=np.int64)))
    labels = np.zeros(len(samples))
    labels[0] = 1.0
    rows_mat = params.w_out[samples]
    x = np.clip(rows_mat @ h, -_kernels.MAX_EXP, _kernels.MAX_EXP)
    sig = 1.0 / (1.0 + np.exp(-x))
    loss = float(np.log1p(np.exp(-x[0])) + np.sum(np.log1p(np.exp(x[1:]))))
    dldx = sig - labels
    grad_h = dldx @ rows_mat
    rows, inverse = np.unique(samples, return_inverse=True)
    grad_rows = np.zeros((len(rows), h.shape[0]))
    np.add.at(grad_rows, inverse, dldx[:, None] * h[None, :])
    return loss, grad_h, rows, grad_rows


def draw_negatives(table: NegativeSamplingTable, target: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw k noise words, redrawing target collisions; a negative that
    collides on every try is dropped rather than forced."""
    slots = table.slots
    size = len(slots)
    out = []
    for _ in range(k):
        for _attempt in range(MAX_NEGATIVE_DRAWS):
            word = int(slots[int(rng.integers(0, size))])
            if word != target:
                out.append(word)
                break
    return np.asarray(out, dtype=np.int64)


def cbow_step(
    doc: Sequence[int] | np.ndarray,
    position: int,
    params: ModelParameters,
    config: TrainConfig,
    table: NegativeSamplingTable,
    rng: np.random.Generator,
) -> float | None:
    """Run one training position of an index-encoded document.

    Returns the position's loss, or None when the context is empty
    (single-token document or zero dynamic radius at the edge) and no
    update happens.
    """
    doc = np.asarray(doc, dtype=np.int64)
    if not 0 <= position < len(doc):
        raise IndexError(f"position {position} outside document of {len(doc)} tokens")
    radius = int(rng.integers(1, config.window + 1)) if config.dynamic_window else config.window
    lo = max(0, position - radius)
    hi = min(len(doc), position + radius + 1)
    ctx = np.concatenate((doc[lo:position], doc[position + 1:hi]))
    if len(ctx) == 0:
        return None
    target = int(doc[position])
    negatives = draw_negatives(table, target, config.negatives, rng)
    return _kernels.step_numpy(params.w_in, params.w_out, ctx, target, negatives, params.alpha)


def _encode_corpus(corpus, vocab: Vocabulary) -> list[np.ndarray]:
    if isinstance(corpus, (str, Path)):
        corpus = read_corpus(corpus)
    docs = []
    for doc in corpus:
        encoded = vocab.encode(doc)
        if len(encoded):
            docs.append(encoded)
    return docs


def _draw_negatives_batch(
    table: NegativeSamplingTable, targets: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized draw_negatives over all positions of a chunk; -1 marks
    a negative dropped after exhausting its redraw budget."""
    slots = table.slots
    size = len(slots)
    negs = slots[rng.integers(0, size, size=(len(targets), k))].astype(np.int32)
    collide = negs == targets[:, None]
    tries = 1
    while collide.any() and tries < MAX_NEGATIVE_DRAWS:
        negs[collide] = slots[rng.integers(0, size, size=int(collide.sum()))]
        collide = negs == targets[:, None]
        tries += 1
    negs[collide] = -1
    return negs


@dataclass
class _SharedState:
    lock: threading.Lock = field(default_factory=threading.Lock)
    processed: int = 0
    next_report: int = _PROGRESS_EVERY
    started: float = field(default_factory=time.perf_counter)
    epoch_loss: float = 0.0
    epoch_steps: int = 0


def _schedule_alpha(alpha0: float, processed: int, sched_denom: float) -> float:
    return max(alpha0 * (1.0 - processed / sched_denom), alpha0 * ALPHA_FLOOR_RATIO)


def _iter_chunks(docs: list[np.ndarray]):
    chunk: list[np.ndarray] = []
    budget = 0
    for doc in docs:
        chunk.append(doc)
        budget += len(doc)
        if budget >= _CHUNK_TOKEN_BUDGET:
            yield chunk
            chunk, budget = [], 0
    if chunk:
        yield chunk


def _run_worker_epoch(
    docs: list[np.ndarray],
    params: ModelParameters,
    table: NegativeSamplingTable,
    config: TrainConfig,
    keep_probs: np.ndarray | None,
    rng: np.random.Generator,
    kernel,
    state: _SharedState,
    sched_denom: float,
) -> None:
    for chunk_docs in _iter_chunks(docs):
        raw_counts = np.array([len(doc) for doc in chunk_docs], dtype=np.int64)
        if keep_probs is None:
            parts = chunk_docs
        else:
            parts = [doc[rng.random(len(doc)) < keep_probs[doc]] for doc in chunk_docs]
        bounds = np.zeros(len(parts) + 1, dtype=np.int64)
        np.cumsum([len(p) for p in parts], out=bounds[1:])
        tokens = np.concatenate(parts) if parts else np.empty(0, dtype=np.int32)
        tokens = np.ascontiguousarray(tokens, dtype=np.int32)
        n_pos = len(tokens)
        if config.dynamic_window:
            radii = rng.integers(1, config.window + 1, size=n_pos, dtype=np.int32)
        else:
            radii = np.full(n_pos, config.window, dtype=np.int32)
        negatives = _draw_negatives_batch(table, tokens, config.negatives, rng)
        with state.lock:
            processed_start = state.processed
        loss_sum, steps = kernel(
            params.w_in, params.w_out, tokens, bounds, raw_counts, negatives, radii,
            config.alpha, config.alpha * ALPHA_FLOOR_RATIO, sched_denom, processed_start,
        )
        with state.lock:
            state.processed += int(raw_counts.sum())
            state.epoch_loss += loss_sum
            state.epoch_steps += steps
            params.processed_tokens = state.processed
            params.alpha = _schedule_alpha(config.alpha, state.processed, sched_denom)
            if state.processed >= state.next_report:
                elapsed = time.perf_counter() - state.started
                rate = state.processed / elapsed if elapsed > 0 else 0.0
                mean_loss = state.epoch_loss / state.epoch_steps if state.epoch_steps else float("nan")
                log.info(
                    "progress: %d tokens, %.0f tokens/s, alpha=%.5f, mean_loss=%.4f",
                    state.processed, rate, params.alpha, mean_loss,
                )
                while state.next_report <= state.processed:
                    state.next_report += _PROGRESS_EVERY


def train(
    corpus: str | Path | Iterable[CorpusDocument],
    vocab: Vocabulary,
    table: NegativeSamplingTable,
    config: TrainConfig,
) -> TrainResult:
    """Run the full training loop and return parameters plus per-epoch stats.

    The corpus (path to a normalized corpus file, or an iterable of token
    documents) is index-encoded up front, dropping out-of-vocabulary
    tokens, so one pass over the input feeds every epoch. Workers get
    contiguous document ranges of the encoded corpus.
    """
    config.validate()
    docs = _encode_corpus(corpus, vocab)
    if not docs:
        raise UsageError("corpus is empty after vocabulary filtering; nothing to train on")
    params = init_parameters(vocab, config)
    keep_probs = keep_probability_vector(vocab, config.subsample) if config.subsample > 0 else None
    kernel, engine = _kernels.get_chunk_kernel()
    sched_denom = float(config.epochs * vocab.total_tokens)
    state = _SharedState()
    workers = min(config.workers, len(docs))
    rngs = [np.random.default_rng([config.seed, worker]) for worker in range(workers)]
    cuts = np.linspace(0, len(docs), workers + 1).astype(int)
    partitions = [docs[cuts[w]:cuts[w + 1]] for w in range(workers)]
    log.info("training: %d documents, vocabulary %d, engine %s, %d worker(s)",
             len(docs), len(vocab), engine, workers)

    started = time.perf_counter()
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        state.epoch_loss = 0.0
        state.epoch_steps = 0
        if workers == 1:
            _run_worker_epoch(docs, params, table, config, keep_probs, rngs[0],
                              kernel, state, sched_denom)
        else:
            threads = [
                threading.Thread(
                    target=_run_worker_epoch,
                    args=(partitions[w], params, table, config,
                          keep_probs, rngs[w], kernel, state, sched_denom),
                    name=f"toxivec-worker-{w}",
                )
                for w in range(workers)
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()
        if not (np.isfinite(params.w_in).all() and np.isfinite(params.w_out).all()):
            raise TrainingDivergedError(f"non-finite parameter after epoch {epoch + 1}")
        epoch_losses.append(state.epoch_loss / state.epoch_steps if state.epoch_steps else float("nan"))
        log.info("epoch %d/%d: mean_loss=%.4f alpha=%.5f",
                 epoch + 1, config.epochs, epoch_losses[-1], params.alpha)
    return TrainResult(
        params=params,
        epoch_losses=epoch_losses,
        duration_s=time.perf_counter() - started,
        engine=engine,
    )
