"""Polynomial masking schedules ``alpha(t) = 1 - t**w``.

``alpha(t)`` is the probability that a token is still unmasked at time ``t``.
A :class:`MultivariateSchedule` holds one exponent per sequence position,
stored as log-weights so that unconstrained optimizers keep ``w > 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError

T_MIN = 1e-4
W_MIN = 0.05
W_MAX = 20.0


def _check_unit(t, name="t"):
    arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _as_result(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class ScheduleParams:
    """A single-position schedule ``alpha(t) = 1 - t**weight``."""

    weight: float = 1.0
    eps: float = T_MIN
    kind: str = "polynomial"

    def __post_init__(self):
        if self.kind != "polynomial":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (self.weight > 0 and np.isfinite(self.weight)):
            raise ValueError(f"weight must be positive, got {self.weight}")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"eps must lie in (0, 0.5), got {self.eps}")


def alpha(s: ScheduleParams, t):
    t = _check_unit(t)
    return _as_result(1.0 - t**s.weight)


def alpha_prime(s: ScheduleParams, t):
    """Time derivative ``-w * t**(w - 1)``."""
    t = _check_unit(t)
    if s.weight < 1.0 and np.any(t == 0.0):
        raise DomainError("alpha' is singular at t = 0 when w < 1")
    with np.errstate(divide="ignore"):
        out = -s.weight * np.power(t, s.weight - 1.0)
    return _as_result(out)


def alpha_inverse(s: ScheduleParams, u):
    """The time at which ``alpha`` equals ``u``: ``(1 - u)**(1/w)``."""
    u = _check_unit(u, "u")
    return _as_result((1.0 - u) ** (1.0 / s.weight))


def alpha_conditional(s: ScheduleParams, s_time, t_time):
    """``alpha(t) / alpha(s)``, the probability of surviving from s to t."""
    st = _check_unit(s_time, "s_time")
    tt = _check_unit(t_time, "t_time")
    if np.any(st > tt):
        raise DomainError("alpha_conditional requires s_time <= t_time")
    a_s = 1.0 - st**s.weight
    if np.any(a_s == 0.0):
        raise DomainError("alpha(s_time) = 0; conditional is undefined")
    a_t = 1.0 - tt**s.weight
    return _as_result(np.where(st == tt, 1.0, a_t / a_s))


def loss_weight(s: ScheduleParams, t):
    """``-alpha'(t) / (1 - alpha(t))``, which simplifies to ``w / t``."""
    t = _check_unit(t)
    if np.any(t == 0.0):
        raise DomainError("loss weight is singular at t = 0")
    return _as_result(s.weight / t)


@dataclass
class MultivariateSchedule:
    """Per-position polynomial schedules parameterized by ``rho = log w``."""

    log_weights: np.ndarray = field(default_factory=lambda: np.zeros(1))
    eps: float = T_MIN

    def __post_init__(self):
        self.log_weights = np.array(self.log_weights, dtype=np.float64).reshape(-1)
        if self.log_weights.size < 1:
            raise ValueError("a schedule needs at least one position")
        if not np.all(np.isfinite(self.log_weights)):
            raise ValueError("log-weights must be finite")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"eps must lie in (0, 0.5), got {self.eps}")

    @classmethod
    def linear(cls, length: int, eps: float = T_MIN) -> "MultivariateSchedule":
        return cls(np.zeros(length), eps)

    @classmethod
    def from_weights(cls, weights, eps: float = T_MIN) -> "MultivariateSchedule":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        return cls(np.log(w), eps)

    def __len__(self) -> int:
        return self.log_weights.size

    def __getitem__(self, pos: int) -> ScheduleParams:
        return ScheduleParams(float(self.weights[pos]), self.eps)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def copy(self) -> "MultivariateSchedule":
        return MultivariateSchedule(self.log_weights.copy(), self.eps)

    def clamp(self, w_min: float = W_MIN, w_max: float = W_MAX) -> None:
        """Clip weights into ``[w_min, w_max]`` in place."""
        np.clip(self.log_weights, np.log(w_min), np.log(w_max), out=self.log_weights)

    # Vectorized evaluation: ``t`` of shape (...,) gives (..., L).

    def mask_prob(self, t) -> np.ndarray:
        """``1 - alpha_l(t) = t**w_l`` for every position."""
        t = _check_unit(t)
        return np.power(t[..., None], self.weights)

    def alpha(self, t) -> np.ndarray:
        return 1.0 - self.mask_prob(t)

    def alpha_prime(self, t) -> np.ndarray:
        t = _check_unit(t)
        w = self.weights
        if np.any(t == 0.0) and np.any(w < 1.0):
            raise DomainError("alpha' is singular at t = 0 when w < 1")
        with np.errstate(divide="ignore"):
            return -w * np.power(t[..., None], w - 1.0)

    def alpha_inverse(self, u) -> np.ndarray:
        """Inverse CDF of transition times; ``u`` has shape (..., L)."""
        u = _check_unit(u, "u")
        return np.power(1.0 - u, 1.0 / self.weights)

    def loss_weight(self, t) -> np.ndarray:
        t = _check_unit(t)
        if np.any(t == 0.0):
            raise DomainError("loss weight is singular at t = 0")
        return self.weights / t[..., None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "polynomial",
            "log_weights": [float(r) for r in self.log_weights],
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MultivariateSchedule":
        kind = data.get("kind", "polynomial")
        if kind != "polynomial":
            raise ValueError(f"unknown schedule kind {kind!r}")
        return cls(np.asarray(data["log_weights"], dtype=np.float64), float(data.get("eps", T_MIN)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MultivariateSchedule":
        return cls.from_dict(json.loads(text))
