"""Masking forward process, its posterior, and transition-time sampling.

Sequences are integer arrays of shape ``(..., L)``; ``MASK`` (-1) marks an
absorbed position.  One-hot layouts place the mask at index ``V_l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .schedule import MultivariateSchedule, ScheduleParams

MASK = -1


@dataclass(frozen=True)
class SequenceState:
    """A single sequence over per-position alphabets, possibly masked."""

    tokens: tuple[int, ...]
    vocab_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(k) for k in self.tokens))
        object.__setattr__(self, "vocab_sizes", tuple(int(v) for v in self.vocab_sizes))
        if len(self.tokens) != len(self.vocab_sizes):
            raise InvalidInputError("tokens and vocab_sizes differ in length")
        for pos, (k, v) in enumerate(zip(self.tokens, self.vocab_sizes)):
            if v < 1:
                raise InvalidInputError(f"vocab size at position {pos} must be >= 1")
            if k != MASK and not 0 <= k < v:
                raise InvalidInputError(f"token {k} out of range at position {pos}")

    @property
    def masked(self) -> np.ndarray:
        return np.asarray(self.tokens) == MASK

    def array(self) -> np.ndarray:
        return np.asarray(self.tokens, dtype=np.int64)


def check_clean(x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.int64)
    if np.any(x0 == MASK):
        raise InvalidInputError("clean sequence x0 contains MASK")
    return x0


def apply_mask(x0: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Return ``x0`` with positions where ``mask`` is true replaced by MASK."""
    return np.where(mask, MASK, x0)


def sample_masked_state(ms: MultivariateSchedule, t, x0, rng: np.random.Generator) -> np.ndarray:
    """Draw ``x_t ~ q(x_t | x_0)``: each position is masked w.p. ``1 - alpha_l(t)``.

    ``t`` broadcasts against the leading dimensions of ``x0``.
    """
    x0 = check_clean(x0)
    if x0.shape[-1] != len(ms):
        raise InvalidInputError("sequence length does not match the schedule")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x0.shape[:-1])
    p_mask = ms.mask_prob(t)
    return apply_mask(x0, rng.random(x0.shape) < p_mask)


def posterior_unmask_prob(s: ScheduleParams, s_time, t_time):
    """Probability that a token masked at ``t_time`` is revealed by ``s_time``.

    Equals ``(alpha_s - alpha_t) / (1 - alpha_t)``, written as
    ``1 - (s/t)**w`` to stay accurate when both alphas are close to one.
    """
    st = np.asarray(s_time, dtype=np.float64)
    tt = np.asarray(t_time, dtype=np.float64)
    if np.any((st < 0) | (tt > 1) | (st > tt)):
        raise DomainError("posterior_unmask_prob requires 0 <= s_time <= t_time <= 1")
    if np.any(tt == 0.0):
        raise DomainError("1 - alpha(t_time) is zero at t_time = 0")
    out = 1.0 - (st / tt) ** s.weight
    return float(out) if out.ndim == 0 else out


def sample_transition_times(ms: MultivariateSchedule, rng: np.random.Generator, size=None) -> np.ndarray:
    """Inverse-CDF draws of per-position transition times.

    Each ``t*_l`` has CDF ``1 - alpha_l(t)``.  Returns shape ``(L,)`` or
    ``(*size, L)``.
    """
    shape = (len(ms),) if size is None else (*np.atleast_1d(size), len(ms))
    return ms.alpha_inverse(rng.random(shape))
