"""Negated-ELBO estimators and exact small-instance oracles.

All public losses are in nats and nonnegative (lower is better).  The
continuous-time loss with per-position schedules is

    int_0^1 sum_l  -alpha'_l / (1 - alpha_l)  E_{x_t}[ -log mu_l^{x0_l}(x_t) ] dt,

where only masked positions contribute.  Two exact evaluations exist for
time-independent denoisers: a mixture over decoding orders, and a weighted
sum over mask patterns.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .denoiser import DenoiserParams, target_log_probs
from .errors import BudgetError, InvalidInputError, UnsupportedRegimeError
from .forward_process import MASK, apply_mask, check_clean, sample_transition_times
from .orders import all_orders, exact_order_prob
from .schedule import MultivariateSchedule

MAX_ORDER_LENGTH = 5
MAX_SUBSET_LENGTH = 12
QUAD_TOL = 1e-10
CHUNK = 1 << 16


@dataclass(frozen=True)
class LossEstimate:
    value: float
    std_error: float = 0.0
    n_samples: int = 0

    @classmethod
    def from_samples(cls, samples) -> "LossEstimate":
        s = np.asarray(samples, dtype=np.float64).ravel()
        se = float(s.std(ddof=1) / np.sqrt(s.size)) if s.size > 1 else 0.0
        return cls(float(s.mean()), se, int(s.size))


@dataclass(frozen=True)
class OrderLogLik:
    order: tuple[int, ...]
    loglik: float


@dataclass(frozen=True)
class TimeDraws:
    """Importance-sampled times on ``(0, 1]``.

    ``inv_tq`` is ``1 / (t q(t))`` so that ``w_l * inv_tq`` is the
    importance-weighted loss weight ``(-alpha'_l / (1 - alpha_l)) / q(t)``.
    """

    log_t: np.ndarray
    inv_tq: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.exp(self.log_t)

    def mask_prob(self, ms: MultivariateSchedule) -> np.ndarray:
        return np.exp(ms.weights * self.log_t[..., None])

    def loss_weight(self, ms: MultivariateSchedule) -> np.ndarray:
        return ms.weights * self.inv_tq[..., None]


def sample_times(ms: MultivariateSchedule, n: int, rng: np.random.Generator, size=()) -> TimeDraws:
    """Stratified draws from the mixture ``q(t) = mean_l a_l t**(a_l - 1)``.

    ``a_l = w_l / 2``.  Each position's weighted integrand
    ``(w_l / t) m_l / q(t)`` then has variance at most ``4 L`` times its
    squared NLL, and the estimate covers all of ``(0, 1]`` with no clamping.
    Component labels are balanced across the ``n`` draws.
    """
    a = 0.5 * ms.weights
    L = a.size
    u = (np.arange(n) + rng.random((*size, n))) / n
    u = np.maximum(u, np.finfo(float).tiny)
    # balanced labels; the random offset makes each label's expected count n / L
    comp = (np.argsort(rng.random((*size, n)), axis=-1) + rng.integers(L, size=(*size, 1))) % L
    log_t = np.log(u) / a[comp]
    # t q(t) = mean_j a_j t**a_j, evaluated in log space
    tq = np.mean(a * np.exp(a * log_t[..., None]), axis=-1)
    return TimeDraws(log_t, 1.0 / tq)


def _batched_target_log_probs(params, x, x0, t):
    out = np.empty(x.shape)
    for lo in range(0, x.shape[0], CHUNK):
        sl = slice(lo, lo + CHUNK)
        tt = t[sl] if np.ndim(t) else t
        out[sl] = target_log_probs(params, x[sl], x0 if x0.ndim == 1 else x0[sl], tt)
    return out


def mc_integrand(params, ms: MultivariateSchedule, x0: np.ndarray, draws: TimeDraws, rng) -> np.ndarray:
    """Weighted masked NLL for rows ``x0`` ``(N, L)`` at times ``draws`` ``(N,)``."""
    mask = rng.random(x0.shape) < draws.mask_prob(ms)
    xt = apply_mask(x0, mask)
    nll = -_batched_target_log_probs(params, xt, x0, draws.t)
    return np.sum(draws.loss_weight(ms) * mask * nll, axis=-1)


def mc_loss(params: DenoiserParams, ms: MultivariateSchedule, x0, rng: np.random.Generator, n_t: int) -> LossEstimate:
    """Stratified Monte-Carlo estimate of the continuous-time loss for ``x0``.

    Draws ``n_t`` importance-sampled times (see :func:`sample_times`) and one
    mask pattern per time; only masked positions contribute.
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    x0 = check_clean(x0)
    if x0.ndim != 1:
        raise InvalidInputError("mc_loss expects a single sequence")
    draws = sample_times(ms, n_t, rng)
    xs = np.broadcast_to(x0, (n_t, x0.size))
    return LossEstimate.from_samples(mc_integrand(params, ms, xs, draws, rng))


def _step_log_ratios(w: float, T: int):
    """Per-step ``log p_theta - log q`` pieces for one position, without mu.

    Index ``i`` (0-based) is the step from ``t = (i+1)/T`` to ``s = i/T``.
    ``keep``: x -> x (unmasked at both ends), ``jump``: the step in which the
    token is masked (x at s, m at t), ``stay``: m -> m.  Written in terms of
    the mask probability ``F = 1 - alpha = t**w``.
    """
    grid = np.arange(T + 1) / T
    F = grid**w
    Fs, Ft = F[:-1], F[1:]
    with np.errstate(divide="ignore"):
        # keep: p = 1, q = alpha_{t|s} = (1 - F_t) / (1 - F_s)
        keep = -(np.log1p(-Ft) - np.log1p(-Fs))
        # jump: p = (alpha_s - alpha_t)/(1 - alpha_t) * mu, q = 1 - alpha_{t|s}
        log_p = np.log(Ft - Fs) - np.log(Ft)
        log_q = np.log(Ft - Fs) - np.log1p(-Fs)
        jump = log_p - log_q
        # stay: p = (1 - alpha_s)/(1 - alpha_t), q = 1
        stay = np.log(Fs) - np.log(Ft)
    keep[-1] = 0.0  # only reached when the token never masks, impossible at t = 1
    stay[0] = 0.0  # only reached after a jump, so i >= 1
    keep_prefix = np.concatenate([[0.0], np.cumsum(keep)])  # sum over steps < i
    stay_suffix = np.concatenate([np.cumsum(stay[::-1])[::-1], [0.0]])  # sum over steps > i
    return keep_prefix, jump, stay_suffix


def discrete_elbo(
    params: DenoiserParams,
    ms: MultivariateSchedule,
    x0,
    T: int,
    rng: np.random.Generator,
    n_traj: int,
) -> LossEstimate:
    """Monte-Carlo negated discrete-time ELBO with ``T`` steps.

    For each forward trajectory, each position is masked in a single step
    ``i*``; its summed log-ratios are read off the per-step table and the
    model term ``log mu`` is evaluated on the state at ``t(i*)``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    x0 = check_clean(x0)
    L = x0.size
    tstar = sample_transition_times(ms, rng, size=n_traj)
    step = np.clip(np.ceil(tstar * T).astype(np.int64), 1, T) - 1  # 0-based step index

    ratio = np.zeros((n_traj, L))
    for pos in range(L):
        keep_prefix, jump, stay_suffix = _step_log_ratios(ms.weights[pos], T)
        i = step[:, pos]
        ratio[:, pos] = keep_prefix[i] + jump[i] + stay_suffix[i + 1]

    # state seen when position l is masked: every j with step_j <= step_l masked
    states = np.where(step[:, None, :] <= step[:, :, None], MASK, x0)
    times = (step + 1) / T
    logmu_all = _batched_target_log_probs(
        params, states.reshape(-1, L), np.broadcast_to(x0, (n_traj * L, L)), times.reshape(-1)
    ).reshape(n_traj, L, L)
    logmu = np.einsum("nll->nl", logmu_all)
    return LossEstimate.from_samples(-(ratio + logmu).sum(axis=1))


def _require_time_independent(params: DenoiserParams):
    if params.config.time_conditioned:
        raise UnsupportedRegimeError("exact oracles require a time-independent denoiser")


def order_logliks(params: DenoiserParams, x0) -> list[OrderLogLik]:
    """Autoregressive log-likelihood of ``x0`` under every order.

    At step ``i`` of order ``perm`` the positions ``perm[:i+1]`` are masked
    and the model predicts ``perm[i]``.
    """
    _require_time_independent(params)
    x0 = check_clean(x0)
    L = x0.size
    patterns = _patterns(L)
    lp = target_log_probs(params, apply_mask(x0, patterns), x0)
    index = {tuple(p): k for k, p in enumerate(patterns.tolist())}
    out = []
    for perm in all_orders(L):
        mask = [False] * L
        ll = 0.0
        for pos in perm:
            mask[pos] = True
            ll += lp[index[tuple(mask)], pos]
        out.append(OrderLogLik(perm, ll))
    return out


def exact_order_loss(
    params: DenoiserParams, ms: MultivariateSchedule, x0, method: str = "quadrature"
) -> LossEstimate:
    """``-sum_pi P(pi) LL_pi`` by enumerating all ``L!`` orders."""
    _require_time_independent(params)
    L = len(ms)
    if L > MAX_ORDER_LENGTH:
        raise BudgetError(f"exact_order_loss supports L <= {MAX_ORDER_LENGTH}, got {L}")
    terms = [exact_order_prob(ms, o.order, method) * o.loglik for o in order_logliks(params, x0)]
    return LossEstimate(-math.fsum(terms), 0.0, 0)


def _patterns(L: int) -> np.ndarray:
    return np.array(list(itertools.product([False, True], repeat=L)))


def subset_weights(ms: MultivariateSchedule, method: str = "quadrature", t_lo: float = 0.0):
    """Weights ``W[k, l]`` for mask pattern ``k`` and target position ``l``.

    ``W = int_{t_lo}^1 (-alpha'_l) prod_{j != l} [masked: 1 - alpha_j,
    observed: alpha_j] dt`` for ``l`` masked in the pattern, else 0.
    Returns ``(patterns, W)`` with patterns of shape ``(2**L, L)``.
    """
    L = len(ms)
    if L > MAX_SUBSET_LENGTH:
        raise BudgetError(f"subset weights support L <= {MAX_SUBSET_LENGTH}, got {L}")
    pats = _patterns(L)
    w = ms.weights
    W = np.zeros(pats.shape)
    if method == "closed_form":
        for pos in range(L):
            W[:, pos] = _closed_form_subset(w, pos, pats, t_lo)[0]
        W[~pats] = 0.0
        return pats, W
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    for k, pat in enumerate(pats):
        for pos in np.flatnonzero(pat):
            others = np.arange(L) != pos
            W[k, pos] = _kernels.subset_weight(
                float(w[pos]),
                w[others & pat].tolist(),
                w[others & ~pat].tolist(),
                float(t_lo),
                QUAD_TOL,
            )
    return pats, W


def _closed_form_subset(w, pos, pats, t_lo, with_grad=False):
    """Inclusion-exclusion expansion of the subset weights for one target.

    Expanding ``prod_observed (1 - t**w_j)`` turns each weight into
    ``sum_S (-1)**|S| w_l / E_S (1 - t_lo**E_S)``.  Returns the weights for
    every pattern and, optionally, their gradients in ``log w``.
    """
    L = w.size
    n_pat = pats.shape[0]
    out = np.zeros(n_pat)
    grad = np.zeros((n_pat, L)) if with_grad else None
    log_lo = np.log(t_lo) if t_lo > 0 else None
    for k in range(n_pat):
        if not pats[k, pos]:
            continue
        masked = pats[k] & (np.arange(L) != pos)
        observed = np.flatnonzero(~pats[k])
        n_obs = observed.size
        # all subsets S of the observed positions
        sel = ((np.arange(1 << n_obs)[:, None] >> np.arange(n_obs)) & 1).astype(bool)
        sign = np.where(sel.sum(axis=1) % 2 == 0, 1.0, -1.0)
        E = w[pos] + w[masked].sum() + sel @ w[observed]
        tail = 1.0 if log_lo is None else 1.0 - np.exp(E * log_lo)
        base = w[pos] / E
        out[k] = math.fsum(sign * base * tail)
        if with_grad:
            # dE/drho_j = w_j where j contributes to E
            contrib = np.zeros((sel.shape[0], L))
            contrib[:, pos] = w[pos]
            contrib[:, masked] = w[masked]
            contrib[:, observed] = sel * w[observed]
            dbase = -base[:, None] / E[:, None] * contrib
            dbase[:, pos] += base
            if log_lo is None:
                dtail = 0.0
            else:
                dtail = -(np.exp(E * log_lo) * log_lo)[:, None] * contrib
            g = dbase * (tail if np.ndim(tail) == 0 else tail[:, None]) + base[:, None] * dtail
            grad[k] = (sign[:, None] * g).sum(axis=0)
    return out, grad


def pattern_nll(params: DenoiserParams, x0, pats: np.ndarray) -> np.ndarray:
    """``-log mu_l^{x0_l}`` on ``x0`` masked by each pattern, ``(2**L, L)``."""
    return -target_log_probs(params, apply_mask(x0, pats), x0)


def exact_subset_loss(
    params: DenoiserParams,
    ms: MultivariateSchedule,
    x0,
    method: str = "quadrature",
    t_lo: float = 0.0,
) -> LossEstimate:
    """Loss as a weighted sum over all ``2**L`` mask patterns.

    ``t_lo > 0`` restricts the time integral to ``[t_lo, 1]``.
    """
    _require_time_independent(params)
    x0 = check_clean(x0)
    pats, W = subset_weights(ms, method, t_lo)
    nll = pattern_nll(params, x0, pats)
    return LossEstimate(math.fsum((W * nll)[pats]), 0.0, 0)
