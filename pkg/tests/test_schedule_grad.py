import numpy as np
import pytest

from ordermask.errors import InvalidInputError
from ordermask.losses import exact_subset_loss
from ordermask.schedule import MultivariateSchedule
from ordermask.schedule_grad import (
    exact_schedule_grad,
    mask_score,
    rloo_group_terms,
    rloo_schedule_grad,
)

from conftest import random_net, uniform_net


def test_group_terms_cancel_constant_rewards():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=(5, 4, 3))
    np.testing.assert_array_equal(rloo_group_terms(np.full((5, 4), 2.5), scores), 0.0)


def test_group_terms_shift_invariance():
    rng = np.random.default_rng(1)
    rewards, scores = rng.normal(size=(6, 4)), rng.normal(size=(6, 4, 2))
    np.testing.assert_allclose(rloo_group_terms(rewards + 7.0, scores), rloo_group_terms(rewards, scores), atol=1e-12)


def test_group_terms_need_two_samples():
    with pytest.raises(ValueError):
        rloo_group_terms(np.zeros((3, 1)), np.zeros((3, 1, 2)))


def test_mask_score_matches_finite_difference():
    ms = MultivariateSchedule.from_weights([0.7, 2.0])
    t = 0.35
    mask = np.array([True, False])

    def logp(rho):
        p = t ** np.exp(rho)
        return np.sum(np.where(mask, np.log(p), np.log1p(-p)))

    h = 1e-6
    fd = np.array([(logp(ms.log_weights + h * e) - logp(ms.log_weights - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(mask_score(ms, np.array(t), mask), fd, rtol=1e-6)


def test_exact_gradient_matches_finite_differences():
    params = random_net(0, (2, 3, 2))
    ms = MultivariateSchedule.from_weights([0.5, 1.4, 3.0])
    x0 = np.array([1, 2, 0])
    g = exact_schedule_grad(params, ms, x0).d_log_weights
    h = 1e-5
    fd = np.empty(3)
    for i in range(3):
        up, dn = ms.copy(), ms.copy()
        up.log_weights[i] += h
        dn.log_weights[i] -= h
        fd[i] = (
            exact_subset_loss(params, up, x0, method="closed_form").value
            - exact_subset_loss(params, dn, x0, method="closed_form").value
        ) / (2 * h)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5


def test_exact_gradient_uniform_predictor_is_zero():
    g = exact_schedule_grad(uniform_net((3, 3)), MultivariateSchedule.from_weights([0.5, 2.0]), np.array([0, 2]))
    np.testing.assert_allclose(g.d_log_weights, 0.0, atol=1e-12)


def test_exact_gradient_symmetry():
    # a net whose output ignores the input entirely treats positions alike
    params = uniform_net((2, 2))
    _, b = params.layers()[-1]
    b[:] = [1.0, -1.0, 1.0, -1.0]
    g = exact_schedule_grad(params, MultivariateSchedule.linear(2), np.array([1, 1])).d_log_weights
    assert g[0] == pytest.approx(g[1], abs=1e-12)


def test_rloo_uniform_predictor_is_unbiased_zero(rng):
    ms = MultivariateSchedule.from_weights([0.5, 2.0])
    g = rloo_schedule_grad(uniform_net((2, 2)), ms, np.tile([0, 1], (25_000, 1)), 4, rng)
    assert g.n_samples == 25_000
    assert np.all(np.abs(g.d_log_weights) < 3 * g.std_error)


def test_rloo_matches_exact(rng):
    params = random_net(3, (2, 2))
    ms = MultivariateSchedule.from_weights([0.8, 1.6])
    x0 = np.array([0, 1])
    exact = exact_schedule_grad(params, ms, x0).d_log_weights
    est = [rloo_schedule_grad(params, ms, np.tile(x0, (10_000, 1)), 4, rng).d_log_weights for _ in range(10)]
    mean = np.mean(est, axis=0)
    se = np.std(est, axis=0, ddof=1) / np.sqrt(len(est))
    assert np.all(np.abs(mean - exact) < 3 * se)


def test_variance_reduction_with_more_samples():
    params = random_net(4, (3, 3))
    ms = MultivariateSchedule.from_weights([0.5, 2.0])
    batch = np.tile([2, 0], (2000, 1))

    def var(K):
        rng = np.random.default_rng(K)
        return np.var([rloo_schedule_grad(params, ms, batch, K, rng).d_log_weights for _ in range(30)], axis=0).sum()

    assert var(8) < var(2)


def test_rloo_input_checks(rng):
    params = uniform_net((2, 2))
    ms = MultivariateSchedule.linear(2)
    with pytest.raises(InvalidInputError):
        rloo_schedule_grad(params, ms, np.array([[0, 1]]), 1, rng)
    with pytest.raises(InvalidInputError):
        rloo_schedule_grad(params, ms, np.zeros((0, 2), dtype=int), 2, rng)
