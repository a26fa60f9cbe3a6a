"""Self-checks against exact oracles, runnable from the command line.

Each suite returns a list of :class:`Check` results.  The sample sizes are
chosen so the whole ``all`` suite finishes in well under a minute.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from . import denoiser
from .denoiser import DenoiserConfig
from .forward_process import posterior_unmask_prob, sample_transition_times
from .losses import discrete_elbo, exact_order_loss, exact_subset_loss, mc_loss
from .orders import (
    empirical_order_distribution,
    exact_order_distribution,
    exact_order_prob,
    total_variation,
)
from .schedule import MultivariateSchedule
from .schedule_grad import exact_schedule_grad, rloo_schedule_grad

SUITES = ("cdf", "orders", "elbo", "rloo")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    target: float
    tolerance: float

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.value, self.target, self.tolerance = float(self.value), float(self.target), float(self.tolerance)

    def to_dict(self) -> dict:
        return asdict(self)


def _close(suite, name, value, target, tol) -> Check:
    return Check(suite, name, abs(value - target) <= tol, value, target, tol)


def _random_net(rng, vocab_sizes, hidden=(16,), scale=2.0):
    params = denoiser.init(DenoiserConfig(vocab_sizes, hidden), rng)
    params.flat *= scale
    return params


def suite_cdf(rng) -> list[Check]:
    out = []
    for w in (0.5, 1.0, 2.0, 4.0):
        ms = MultivariateSchedule.from_weights([w])
        t = sample_transition_times(ms, rng, size=100_000)[:, 0]
        ks = stats.kstest(t, lambda x, w=w: np.clip(x, 0, 1) ** w).statistic
        out.append(Check("cdf", f"transition-time KS w={w}", ks < 0.01, ks, 0.0, 0.01))
    # the posterior unmask probability composes: revealing by s via u equals revealing by s directly
    ms = MultivariateSchedule.from_weights([1.7])
    p_su = posterior_unmask_prob(ms[0], 0.2, 0.5)
    p_ut = posterior_unmask_prob(ms[0], 0.5, 0.9)
    direct = posterior_unmask_prob(ms[0], 0.2, 0.9)
    out.append(_close("cdf", "posterior composition", p_ut + (1 - p_ut) * p_su, direct, 1e-12))
    return out


def suite_orders(rng) -> list[Check]:
    ms = MultivariateSchedule.from_weights([1.0, 2.0])
    out = [_close("orders", "P([0,1]) for w=(1,2)", exact_order_prob(ms, (0, 1)), 2 / 3, 1e-6)]
    emp = empirical_order_distribution(ms, 100_000, rng).get((0, 1), 0.0)
    out.append(_close("orders", "empirical P([0,1]) for w=(1,2)", emp, 2 / 3, 0.01))
    ms3 = MultivariateSchedule.from_weights(rng.uniform(0.3, 3.0, size=3))
    exact = exact_order_distribution(ms3)
    closed = exact_order_distribution(ms3, method="closed_form")
    out.append(_close("orders", "order probabilities sum to one", sum(exact.values()), 1.0, 1e-6))
    out.append(_close("orders", "quadrature vs closed form", max(abs(exact[k] - closed[k]) for k in exact), 0.0, 1e-7))
    tv = total_variation(exact, empirical_order_distribution(ms3, 200_000, rng))
    out.append(Check("orders", "empirical vs exact TV (L=3)", tv < 0.01, tv, 0.0, 0.01))
    return out


def suite_elbo(rng) -> list[Check]:
    out = []
    params = _random_net(rng, (3, 3, 3))
    ms = MultivariateSchedule.from_weights(rng.uniform(0.5, 2.0, size=3))
    x0 = rng.integers(0, 3, size=3)
    order = exact_order_loss(params, ms, x0).value
    subset = exact_subset_loss(params, ms, x0).value
    out.append(_close("elbo", "order oracle = subset oracle", order, subset, 1e-6))
    mc = mc_loss(params, ms, x0, rng, 50_000)
    out.append(_close("elbo", "mc loss within 3 SE", mc.value, subset, 3 * mc.std_error))

    base = exact_subset_loss(params, MultivariateSchedule.from_weights([1.0] * 3), x0).value
    spread = max(
        abs(exact_subset_loss(params, MultivariateSchedule.from_weights([w] * 3), x0).value - base)
        for w in (0.5, 2.0, 4.0)
    )
    out.append(_close("elbo", "identical-schedule invariance", spread, 0.0, 1e-6))

    uniform = denoiser.zeros(DenoiserConfig((2, 2)))
    ms2 = MultivariateSchedule.from_weights([1.0, 2.0])
    x2 = np.array([0, 1])
    target = 2 * math.log(2)
    out.append(_close("elbo", "uniform predictor, subset oracle", exact_subset_loss(uniform, ms2, x2).value, target, 1e-8))
    d = discrete_elbo(uniform, ms2, x2, 100, rng, 2_000)
    out.append(_close("elbo", "uniform predictor, discrete ELBO", d.value, target, max(3 * d.std_error, 1e-9)))
    return out


def suite_rloo(rng) -> list[Check]:
    out = []
    params = _random_net(rng, (2, 2))
    ms = MultivariateSchedule.from_weights([0.7, 1.8])
    x0 = np.array([1, 0])
    exact = exact_schedule_grad(params, ms, x0).d_log_weights
    h = 1e-5
    fd = np.empty(2)
    for i in range(2):
        up, dn = ms.copy(), ms.copy()
        up.log_weights[i] += h
        dn.log_weights[i] -= h
        fd[i] = (
            exact_subset_loss(params, up, x0, method="closed_form").value
            - exact_subset_loss(params, dn, x0, method="closed_form").value
        ) / (2 * h)
    rel = float(np.max(np.abs(exact - fd)) / max(np.max(np.abs(fd)), 1e-12))
    out.append(Check("rloo", "exact gradient vs finite differences", rel < 1e-5, rel, 0.0, 1e-5))
    est = [rloo_schedule_grad(params, ms, np.tile(x0, (5_000, 1)), 4, rng).d_log_weights for _ in range(20)]
    mean = np.mean(est, axis=0)
    se = np.std(est, axis=0, ddof=1) / np.sqrt(len(est))
    for i in range(2):
        out.append(_close("rloo", f"RLOO unbiased, component {i}", mean[i], exact[i], 3 * se[i]))
    return out


_SUITES = {"cdf": suite_cdf, "orders": suite_orders, "elbo": suite_elbo, "rloo": suite_rloo}


def run_suites(names=("all",), seed: int = 0) -> list[Check]:
    names = SUITES if "all" in names else names
    results = []
    for i, name in enumerate(names):
        if name not in _SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
        results.extend(_SUITES[name](np.random.default_rng([seed, i])))
    return results
