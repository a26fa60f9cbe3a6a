"""Reverse-process samplers.

Both samplers start from the all-MASK sequence.  The order-based sampler
draws transition times, then reveals one position per network call in
descending time; the ancestral sampler steps a time grid ``1 -> 0`` and
reveals each masked position with the posterior unmasking probability.
Batched variants return ``(n, L)`` integer arrays.
"""

from __future__ import annotations

import numpy as np

from . import denoiser
from .denoiser import DenoiserParams
from .errors import InvalidInputError
from .forward_process import MASK, SequenceState, sample_transition_times
from .schedule import MultivariateSchedule
from .tabular import EncodedDataset, TableSchema, decode


def sample_categorical(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of the probability matrix ``p`` ``(N, V)``."""
    c = np.cumsum(p, axis=1)
    u = rng.random((p.shape[0], 1)) * c[:, -1:]
    return np.minimum((c <= u).sum(axis=1), p.shape[1] - 1)


def _check(params: DenoiserParams, ms: MultivariateSchedule):
    if params.config.length != len(ms):
        raise InvalidInputError(
            f"schedule has {len(ms)} positions but the denoiser expects {params.config.length}"
        )


def _reveal(params, x, t, rows, cols, rng):
    """Sample tokens at ``(rows, cols)`` from the denoiser's output at ``(x, t)``."""
    probs = denoiser.forward(params, x, t)
    for pos in np.unique(cols):
        sel = rows[cols == pos]
        x[sel, pos] = sample_categorical(probs[pos][sel], rng)


def generate_order_based_batch(params: DenoiserParams, ms: MultivariateSchedule, n: int, rng) -> np.ndarray:
    """``n`` independent order-based draws using exactly ``L`` batched network calls."""
    _check(params, ms)
    L = len(ms)
    x = np.full((n, L), MASK, dtype=np.int64)
    if n == 0:
        return x
    times = sample_transition_times(ms, rng, size=n)
    gen = np.argsort(times, axis=1, kind="stable")[:, ::-1]
    rows = np.arange(n)
    for k in range(L):
        pos = gen[:, k]
        _reveal(params, x, times[rows, pos], rows, pos, rng)
    return x


def generate_order_based(params: DenoiserParams, ms: MultivariateSchedule, rng) -> SequenceState:
    x = generate_order_based_batch(params, ms, 1, rng)[0]
    return SequenceState(x, params.config.vocab_sizes)


def generate_ancestral_batch(
    params: DenoiserParams, ms: MultivariateSchedule, T: int, n: int, rng
) -> np.ndarray:
    """``n`` draws of the ``T``-step ancestral sampler on the uniform grid."""
    if T < 1:
        raise ValueError("T must be >= 1")
    _check(params, ms)
    L = len(ms)
    x = np.full((n, L), MASK, dtype=np.int64)
    w = ms.weights
    for i in range(T, 0, -1):
        t, s = i / T, (i - 1) / T
        p_unmask = 1.0 - (s / t) ** w
        reveal = (x == MASK) & (rng.random((n, L)) < p_unmask)
        rows, cols = np.nonzero(reveal)
        if rows.size:
            # only rows that reveal something need a network call
            sub = np.unique(rows)
            xs = x[sub]
            _reveal(params, xs, t, np.searchsorted(sub, rows), cols, rng)
            x[sub] = xs
    return x


def generate_ancestral(params: DenoiserParams, ms: MultivariateSchedule, T: int, rng) -> SequenceState:
    x = generate_ancestral_batch(params, ms, T, 1, rng)[0]
    return SequenceState(x, params.config.vocab_sizes)


def synthesize_table(
    params: DenoiserParams, ms: MultivariateSchedule, schema: TableSchema, n_rows: int, rng
) -> tuple[list[str], list[list[str]]]:
    """``(header, rows)`` of ``n_rows`` order-based draws decoded through ``schema``."""
    if tuple(schema.vocab_sizes) != tuple(params.config.vocab_sizes):
        raise InvalidInputError("schema vocab sizes do not match the denoiser")
    if n_rows < 0:
        raise ValueError("n_rows must be >= 0")
    x = generate_order_based_batch(params, ms, n_rows, rng)
    return schema.names, decode(EncodedDataset(schema, x))
