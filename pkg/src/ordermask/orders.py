"""Decoding orders induced by per-position schedules.

An order is the tuple of positions sorted by ascending transition time, so
``perm[0]`` is masked first in the forward process.  Generation runs the
reverse process and therefore reveals positions in ``reversed(perm)``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from . import _kernels
from .errors import BudgetError
from .forward_process import sample_transition_times
from .schedule import MultivariateSchedule

Order = tuple[int, ...]
MAX_EXACT_LENGTH = 6
QUAD_TOL = 1e-8


def decoding_order(times) -> Order:
    """Positions sorted by ascending time; ties keep ascending index."""
    return tuple(int(i) for i in np.argsort(np.asarray(times), kind="stable"))


def generation_order(times) -> Order:
    """Order in which the reverse process reveals positions."""
    return decoding_order(times)[::-1]


def sample_order(ms: MultivariateSchedule, rng: np.random.Generator) -> Order:
    return decoding_order(sample_transition_times(ms, rng))


def sample_orders(ms: MultivariateSchedule, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` orders at once, shape ``(n, L)``."""
    times = sample_transition_times(ms, rng, size=n)
    return np.argsort(times, axis=-1, kind="stable")


def all_orders(length: int):
    return itertools.permutations(range(length))


def _closed_form_order_prob(w: np.ndarray) -> float:
    # G_k(s) = sum_j c_j s**e_j, built from the innermost survival outwards.
    coefs = np.array([1.0, -1.0])
    exps = np.array([0.0, w[-1]])
    for wk in w[-2::-1]:
        scale = coefs * wk / (wk + exps)
        coefs = np.concatenate([scale, -scale])
        exps = np.concatenate([np.zeros_like(exps), wk + exps])
    # G_0(0) keeps only the zero-exponent terms.
    return float(coefs[exps == 0.0].sum()) if len(w) > 1 else 1.0


def exact_order_prob(ms: MultivariateSchedule, order, method: str = "quadrature", tol: float = QUAD_TOL) -> float:
    """Probability that the transition times are sorted as ``order``.

    ``method="quadrature"`` integrates the product of transition-time
    densities over the ordered region by nested adaptive Simpson;
    ``"closed_form"`` expands the same nested integral symbolically, which is
    exact for the polynomial family.
    """
    order = tuple(int(p) for p in order)
    L = len(ms)
    if L > MAX_EXACT_LENGTH:
        raise BudgetError(f"exact order probabilities support L <= {MAX_EXACT_LENGTH}, got {L}")
    if sorted(order) != list(range(L)):
        raise ValueError(f"{order} is not a permutation of range({L})")
    w = ms.weights[list(order)]
    if method == "quadrature":
        return float(_kernels.order_prob(w.tolist(), tol))
    if method == "closed_form":
        return _closed_form_order_prob(w)
    raise ValueError(f"unknown method {method!r}")


def exact_order_distribution(ms: MultivariateSchedule, method: str = "quadrature") -> dict[Order, float]:
    return {order: exact_order_prob(ms, order, method) for order in all_orders(len(ms))}


def empirical_order_distribution(ms: MultivariateSchedule, n: int, rng: np.random.Generator) -> dict[Order, float]:
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = Counter(map(tuple, sample_orders(ms, n, rng).tolist()))
    return {order: c / n for order, c in sorted(counts.items())}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def prob_precedes(ms: MultivariateSchedule, first: int, second: int, method: str = "quadrature") -> float:
    """``P(t*_first < t*_second)``; the pair's marginal order probability."""
    pair = MultivariateSchedule(ms.log_weights[[first, second]], ms.eps)
    return exact_order_prob(pair, (0, 1), method)
