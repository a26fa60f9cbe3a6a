import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordermask.errors import BudgetError
from ordermask.orders import (
    all_orders,
    decoding_order,
    empirical_order_distribution,
    exact_order_distribution,
    exact_order_prob,
    generation_order,
    prob_precedes,
    sample_order,
    sample_orders,
    total_variation,
)
from ordermask.schedule import MultivariateSchedule


def test_decoding_order_examples():
    assert decoding_order([0.9, 0.1]) == (1, 0)
    assert generation_order([0.9, 0.1]) == (0, 1)
    assert decoding_order([0.2, 0.2]) == (0, 1)
    assert decoding_order([0.3, 0.7, 0.5]) == (0, 2, 1)


@pytest.mark.parametrize("method", ["quadrature", "closed_form"])
def test_exact_values(method):
    assert exact_order_prob(MultivariateSchedule.linear(1), (0,), method) == 1.0
    ms = MultivariateSchedule.from_weights([1.0, 2.0])
    assert exact_order_prob(ms, (0, 1), method) == pytest.approx(2 / 3, abs=1e-6)
    for order in all_orders(3):
        assert exact_order_prob(MultivariateSchedule.linear(3), order, method) == pytest.approx(1 / 6, abs=1e-6)


def test_pair_probability_closed_form():
    # P(t_a < t_b) = w_b / (w_a + w_b) for polynomial schedules
    for wa, wb in [(0.5, 1.0), (1.0, 4.0), (2.0, 0.3)]:
        ms = MultivariateSchedule.from_weights([wa, wb])
        assert exact_order_prob(ms, (0, 1)) == pytest.approx(wb / (wa + wb), abs=1e-8)


@given(st.lists(st.floats(0.1, 5.0), min_size=2, max_size=4))
@settings(max_examples=25, deadline=None)
def test_normalization_and_methods_agree(w):
    ms = MultivariateSchedule.from_weights(w)
    quad = exact_order_distribution(ms)
    closed = exact_order_distribution(ms, method="closed_form")
    assert math.fsum(quad.values()) == pytest.approx(1.0, abs=1e-6)
    assert math.fsum(closed.values()) == pytest.approx(1.0, abs=1e-9)
    assert max(abs(quad[k] - closed[k]) for k in quad) < 1e-7


def test_budget_and_validation():
    with pytest.raises(BudgetError):
        exact_order_prob(MultivariateSchedule.linear(7), tuple(range(7)))
    with pytest.raises(ValueError):
        exact_order_prob(MultivariateSchedule.linear(2), (0, 0))
    with pytest.raises(ValueError):
        exact_order_prob(MultivariateSchedule.linear(2), (0, 1), method="bogus")


def test_sampled_order_frequencies(rng):
    ms = MultivariateSchedule.linear(2)
    emp = empirical_order_distribution(ms, 100_000, rng)
    assert abs(emp[(0, 1)] - 0.5) < 0.01
    emp = empirical_order_distribution(MultivariateSchedule.from_weights([1.0, 2.0]), 100_000, rng)
    assert abs(emp[(0, 1)] - 2 / 3) < 0.01 and abs(emp[(1, 0)] - 1 / 3) < 0.01
    emp = empirical_order_distribution(MultivariateSchedule.linear(3), 600_000, rng)
    assert max(abs(p - 1 / 6) for p in emp.values()) < 0.005


def test_single_draw_distribution(rng):
    emp = empirical_order_distribution(MultivariateSchedule.linear(3), 1, rng)
    assert list(emp.values()) == [1.0]


def test_sample_order_matches_batch(rng):
    ms = MultivariateSchedule.from_weights([0.5, 2.0, 1.0])
    order = sample_order(ms, rng)
    assert sorted(order) == [0, 1, 2]
    assert sample_orders(ms, 10, rng).shape == (10, 3)


@pytest.mark.parametrize("L", [2, 3, 4])
def test_empirical_matches_exact(L):
    rng = np.random.default_rng(L)
    ms = MultivariateSchedule.from_weights(rng.uniform(0.3, 3.0, L))
    tv = total_variation(exact_order_distribution(ms, "closed_form"), empirical_order_distribution(ms, 500_000, rng))
    assert tv < 0.01


def test_stochastic_dominance():
    probs = []
    for w in (0.5, 1.0, 2.0, 4.0):
        ms = MultivariateSchedule.from_weights([w, 1.0])
        probs.append(exact_order_prob(ms, (1, 0)))  # position 0 has the largest time
    assert all(a <= b for a, b in zip(probs, probs[1:]))


def test_degenerate_limit():
    ms = MultivariateSchedule.from_weights([0.05, 20.0])
    assert exact_order_prob(ms, (0, 1)) > 0.99


def test_prob_precedes():
    ms = MultivariateSchedule.from_weights([1.0, 3.0, 2.0])
    assert prob_precedes(ms, 0, 1) == pytest.approx(3 / 4, abs=1e-8)
    assert prob_precedes(ms, 1, 0) == pytest.approx(1 / 4, abs=1e-8)


def test_total_variation():
    assert total_variation({(0,): 1.0}, {(0,): 1.0}) == 0.0
    assert total_variation({(0, 1): 1.0}, {(1, 0): 1.0}) == 1.0
