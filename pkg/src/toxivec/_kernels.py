"""Execution engines for the CBOW negative-sampling update.

Two engines share one set of semantics:

* a scalar-loop kernel compiled with numba (the fast path, releases the
  GIL so lock-free multi-worker training actually runs in parallel);
* a numpy per-position reference (`run_chunk_numpy`), also the backend
  of the public single-step API.

`tests/test_trainer.py` asserts the two stay numerically equivalent.
Randomness never happens here: negative samples, window radii and
subsampling decisions are drawn by the caller, so both engines are pure
deterministic arithmetic over their inputs.

Chunk layout: `tokens` holds the vocabulary indices of several documents
back to back, `bounds[d]:bounds[d+1]` delimits document d, and
`raw_counts[d]` is the document's pre-subsampling in-vocabulary token
count, which drives the linear learning-rate schedule.
"""

from __future__ import annotations

import math
import os

import numpy as np

MAX_EXP = 30.0  # logistic argument clamp; keeps exp() well-conditioned


def step_numpy(w_in, w_out, ctx, target, negatives, alpha):
    """Apply one CBOW update at a single position; returns its loss.

    `ctx` are the context row indices (may repeat), `negatives` the
    drawn noise word indices (target collisions already resolved by the
    caller). All logits and the input-side accumulator use the output
    rows as they were before this update.
    """
    h = w_in[ctx].mean(axis=0)
    samples = np.concatenate(([target], negatives)).astype(np.int64)
    labels = np.zeros(len(samples))
    labels[0] = 1.0
    rows = w_out[samples]  # fancy indexing copies: the pre-update rows
    x = np.clip(rows @ h, -MAX_EXP, MAX_EXP)
    sig = 1.0 / (1.0 + np.exp(-x))
    loss = float(np.log1p(np.exp(-x[0])) + np.sum(np.log1p(np.exp(x[1:]))))
    g = alpha * (labels - sig)
    np.add.at(w_out, samples, g[:, None] * h[None, :])
    np.add.at(w_in, ctx, (g @ rows) / len(ctx))
    return loss


def run_chunk_numpy(w_in, w_out, tokens, bounds, raw_counts, negatives, radii,
                    alpha0, alpha_floor, sched_denom, processed_start):
    """Reference chunk walk: per-document alpha schedule + step_numpy."""
    loss_sum = 0.0
    steps = 0
    processed = float(processed_start)
    for d in range(len(bounds) - 1):
        lo, hi = int(bounds[d]), int(bounds[d + 1])
        alpha = max(alpha0 * (1.0 - processed / sched_denom), alpha_floor)
        for p in range(lo, hi):
            r = int(radii[p])
            c0 = max(lo, p - r)
            c1 = min(hi, p + r + 1)
            if c1 - c0 - 1 <= 0:
                continue
            ctx = np.concatenate((tokens[c0:p], tokens[p + 1:c1])).astype(np.int64)
            negs = negatives[p]
            negs = negs[negs >= 0].astype(np.int64)
            loss_sum += step_numpy(w_in, w_out, ctx, int(tokens[p]), negs, alpha)
            steps += 1
        processed += float(raw_counts[d])
    return loss_sum, steps


def _chunk_loop(w_in, w_out, tokens, bounds, raw_counts, negatives, radii,
                alpha0, alpha_floor, sched_denom, processed_start):
    # Scalar-loop clone of run_chunk_numpy, written for numba.
    dim = w_in.shape[1]
    k = negatives.shape[1]
    h = np.empty(dim, np.float64)
    neu1e = np.empty(dim, np.float64)
    rows_buf = np.empty((k + 1, dim), np.float64)
    sample_words = np.empty(k + 1, np.int64)
    loss_sum = 0.0
    steps = 0
    processed = float(processed_start)
    n_docs = bounds.shape[0] - 1
    for d in range(n_docs):
        lo = bounds[d]
        hi = bounds[d + 1]
        alpha = alpha0 * (1.0 - processed / sched_denom)
        if alpha < alpha_floor:
            alpha = alpha_floor
        for p in range(lo, hi):
            r = radii[p]
            c0 = p - r
            if c0 < lo:
                c0 = lo
            c1 = p + r + 1
            if c1 > hi:
                c1 = hi
            n_ctx = c1 - c0 - 1
            if n_ctx <= 0:
                continue
            target = tokens[p]
            for j in range(dim):
                h[j] = 0.0
            for q in range(c0, c1):
                if q == p:
                    continue
                row = tokens[q]
                for j in range(dim):
                    h[j] += w_in[row, j]
            inv_ctx = 1.0 / n_ctx
            for j in range(dim):
                h[j] *= inv_ctx
            n_samples = 1
            sample_words[0] = target
            for s in range(k):
                neg = negatives[p, s]
                if neg >= 0:
                    sample_words[n_samples] = neg
                    n_samples += 1
            for s in range(n_samples):
                w = sample_words[s]
                for j in range(dim):
                    rows_buf[s, j] = w_out[w, j]
            for j in range(dim):
                neu1e[j] = 0.0
            loss = 0.0
            for s in range(n_samples):
                w = sample_words[s]
                x = 0.0
                for j in range(dim):
                    x += rows_buf[s, j] * h[j]
                if x > MAX_EXP:
                    x = MAX_EXP
                elif x < -MAX_EXP:
                    x = -MAX_EXP
                sig = 1.0 / (1.0 + math.exp(-x))
                if s == 0:
                    label = 1.0
                    loss += math.log1p(math.exp(-x))
                else:
                    label = 0.0
                    loss += math.log1p(math.exp(x))
                g = alpha * (label - sig)
                for j in range(dim):
                    neu1e[j] += g * rows_buf[s, j]
                    w_out[w, j] += g * h[j]
            for q in range(c0, c1):
                if q == p:
                    continue
                row = tokens[q]
                for j in range(dim):
                    w_in[row, j] += neu1e[j] * inv_ctx
            loss_sum += loss
            steps += 1
        processed += raw_counts[d]
    return loss_sum, steps


_compiled_chunk = None


def numba_wanted() -> bool:
    return os.environ.get("TOXIVEC_DISABLE_NUMBA", "") in ("", "0")


def get_chunk_kernel():
    """Return (callable, engine_name); compiles the numba kernel lazily."""
    global _compiled_chunk
    if not numba_wanted():
        return run_chunk_numpy, "numpy"
    if _compiled_chunk is None:
        try:
            import numba
        except ImportError:
            return run_chunk_numpy, "numpy"
        _compiled_chunk = numba.njit(cache=True, nogil=True)(_chunk_loop)
    return _compiled_chunk, "numba"
