"""Gradients of the loss with respect to schedule log-weights ``rho = log w``.

For a fixed time ``t`` the loss integrand is
``R(m) = sum_l (w_l / t) m_l nll_l(m)`` with mask ``m_l ~ Bernoulli(t**w_l)``.
Times come from a proposal ``q`` that is held fixed while differentiating,
so each sample is ``R(m) / q(t)``.  The weights ``w_l / t`` are
differentiated directly (pathwise term); the mask distribution is handled
with a leave-one-out REINFORCE (RLOO) term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoiser import DenoiserParams, target_log_probs_and_grad
from .errors import BudgetError, InvalidInputError
from .forward_process import apply_mask, check_clean
from .losses import (
    _batched_target_log_probs,
    _closed_form_subset,
    _patterns,
    _require_time_independent,
    pattern_nll,
    TimeDraws,
    sample_times,
)
from .schedule import MultivariateSchedule

MAX_EXACT_LENGTH = 8


@dataclass
class ScheduleGradient:
    d_log_weights: np.ndarray
    n_samples: int = 0
    baseline_value: float = 0.0
    std_error: np.ndarray | None = field(default=None, repr=False)
    loss: float = float("nan")


def rloo_group_terms(rewards: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Score-function term of one or more K-groups.

    ``rewards`` has shape ``(..., K)`` and ``scores`` ``(..., K, L)``.  Each
    sample's baseline is the mean reward of the other ``K - 1`` samples, so
    adding a constant to every reward leaves the result unchanged.
    """
    K = rewards.shape[-1]
    if K < 2:
        raise ValueError("RLOO needs K >= 2 samples per group")
    total = rewards.sum(axis=-1, keepdims=True)
    adv = rewards - (total - rewards) / (K - 1)
    return np.einsum("...k,...kl->...l", adv, scores) / K


def mask_score(ms: MultivariateSchedule, t: np.ndarray, mask: np.ndarray, log_t=None) -> np.ndarray:
    """``d/d rho log p(mask | t)`` for Bernoulli(``t**w``) masks.

    ``t`` broadcasts against ``mask[..., 0]``; pass ``log_t`` instead when
    ``t`` may underflow.
    """
    w = ms.weights
    log_t = (np.log(t) if log_t is None else np.asarray(log_t))[..., None]
    p = np.exp(w * log_t)
    # d/dw of [m log p + (1 - m) log(1 - p)] with p = t**w
    with np.errstate(divide="ignore", invalid="ignore"):
        unmasked_term = np.where(mask, 0.0, -p * log_t / -np.expm1(w * log_t))
    return w * (np.where(mask, log_t, 0.0) + unmasked_term)


def rloo_estimates(
    params: DenoiserParams,
    ms: MultivariateSchedule,
    x0: np.ndarray,
    draws: TimeDraws,
    K: int,
    rng: np.random.Generator,
    model_grad: bool = False,
):
    """Per-group loss and gradient samples for examples ``x0`` ``(B, L)``.

    ``draws`` holds times of shape ``(B, n_t)``.  Returns ``(loss_groups, grad_groups)``
    of shapes ``(B, n_t)`` and ``(B, n_t, L)``; when ``model_grad`` is true,
    also the gradient of the mean loss w.r.t. the denoiser parameters.
    """
    if K < 2:
        raise InvalidInputError("rloo_schedule_grad needs K >= 2")
    B, L = x0.shape
    n_t = draws.log_t.shape[1]
    log_tk = np.broadcast_to(draws.log_t[..., None], (B, n_t, K))
    kd = TimeDraws(log_tk, np.broadcast_to(draws.inv_tq[..., None], (B, n_t, K)))
    mask = rng.random((B, n_t, K, L)) < kd.mask_prob(ms)
    x0k = np.broadcast_to(x0[:, None, None, :], mask.shape)
    xt = apply_mask(x0k, mask).reshape(-1, L)
    flat_t = kd.t.reshape(-1)
    weight = kd.loss_weight(ms)  # (B, n_t, K, L)

    if model_grad:
        coef = -(weight * mask).reshape(-1, L) / (B * n_t * K)
        logmu, g_model = target_log_probs_and_grad(params, xt, x0k.reshape(-1, L), flat_t, coef)
    else:
        logmu, g_model = _batched_target_log_probs(params, xt, x0k.reshape(-1, L), flat_t), None
    per_pos = weight * mask * -logmu.reshape(mask.shape)
    rewards = per_pos.sum(axis=-1)  # (B, n_t, K)

    pathwise = per_pos.mean(axis=2)  # d(w_l / t)/d rho_l = w_l / t
    score = rloo_group_terms(rewards, mask_score(ms, None, mask, log_t=log_tk))
    grads = pathwise + score
    loss_groups = rewards.mean(axis=-1)
    if model_grad:
        return loss_groups, grads, g_model
    return loss_groups, grads


def rloo_schedule_grad(
    params: DenoiserParams,
    ms: MultivariateSchedule,
    batch,
    K: int,
    rng: np.random.Generator,
    n_t: int = 1,
) -> ScheduleGradient:
    """RLOO estimate of the loss gradient in ``rho`` averaged over ``batch``.

    Each example gets ``n_t`` importance-sampled times and ``K`` masks per
    time.
    """
    if K < 2:
        raise InvalidInputError("rloo_schedule_grad needs K >= 2")
    x0 = check_clean(np.atleast_2d(batch))
    if x0.shape[0] == 0:
        raise InvalidInputError("batch must be nonempty")
    draws = sample_times(ms, n_t, rng, size=(x0.shape[0],))
    loss_g, grad_g = rloo_estimates(params, ms, x0, draws, K, rng)
    g = grad_g.reshape(-1, len(ms))
    n = g.shape[0]
    se = g.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(len(ms))
    return ScheduleGradient(g.mean(axis=0), n, float(loss_g.mean()), se, float(loss_g.mean()))


def exact_schedule_grad(
    params: DenoiserParams, ms: MultivariateSchedule, x0, t_lo: float = 0.0
) -> ScheduleGradient:
    """Exact ``d loss / d rho`` for a time-independent denoiser.

    Differentiates the closed-form subset weights and sums them against the
    (schedule-independent) per-pattern negative log-likelihoods.
    """
    _require_time_independent(params)
    x0 = check_clean(x0)
    L = len(ms)
    if L > MAX_EXACT_LENGTH:
        raise BudgetError(f"exact_schedule_grad supports L <= {MAX_EXACT_LENGTH}, got {L}")
    pats = _patterns(L)
    nll = pattern_nll(params, x0, pats)
    w = ms.weights
    grad = np.zeros(L)
    loss = 0.0
    for pos in range(L):
        W, dW = _closed_form_subset(w, pos, pats, t_lo, with_grad=True)
        sel = pats[:, pos]
        grad += nll[sel, pos] @ dW[sel]
        loss += nll[sel, pos] @ W[sel]
    return ScheduleGradient(grad, 0, float(loss), np.zeros(L), float(loss))
