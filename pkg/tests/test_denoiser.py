import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordermask import denoiser
from ordermask.denoiser import DenoiserConfig, DenoiserParams
from ordermask.forward_process import MASK

from conftest import random_net


def test_parameter_count():
    cfg = DenoiserConfig((2, 2), (8,))
    # input 3 + 3, hidden 8, output 2 + 2
    assert cfg.parameter_count == 6 * 8 + 8 + 8 * 4 + 4
    assert denoiser.init(cfg, np.random.default_rng(0)).flat.size == cfg.parameter_count


def test_config_validation():
    with pytest.raises(ValueError):
        DenoiserConfig((2, 2), ())
    with pytest.raises(ValueError):
        DenoiserConfig((2, 0), (4,))
    with pytest.raises(ValueError):
        DenoiserConfig((2,), (4,), activation="gelu")
    with pytest.raises(ValueError):
        DenoiserParams(DenoiserConfig((2,), (4,)), np.zeros(3))


def test_config_roundtrip():
    cfg = DenoiserConfig((3, 5), (16, 8), True, "relu")
    assert DenoiserConfig.from_dict(cfg.to_dict()) == cfg


def test_init_is_deterministic():
    cfg = DenoiserConfig((3, 3), (8,))
    a = denoiser.init(cfg, np.random.default_rng(7))
    b = denoiser.init(cfg, np.random.default_rng(7))
    np.testing.assert_array_equal(a.flat, b.flat)


def test_zero_weights_give_uniform():
    params = denoiser.zeros(DenoiserConfig((4, 2), (4,)))
    out = denoiser.forward(params, np.array([MASK, MASK]))
    np.testing.assert_allclose(out[0], 0.25)
    np.testing.assert_allclose(out[1], 0.5)


def test_carry_over():
    params = random_net(0, (3, 4))
    out = denoiser.forward(params, np.array([2, MASK]))
    np.testing.assert_array_equal(out[0], [0, 0, 1])
    assert out[1].sum() == pytest.approx(1.0, abs=1e-12)


@given(seed=st.integers(0, 10_000), tc=st.booleans())
@settings(max_examples=30, deadline=None)
def test_outputs_are_distributions(seed, tc):
    rng = np.random.default_rng(seed)
    vocab = tuple(rng.integers(1, 5, size=3))
    params = random_net(seed, vocab, time_conditioned=tc)
    x = np.array([rng.integers(-1, v) for v in vocab])
    for p in denoiser.forward(params, x, rng.random()):
        assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


def test_time_independence():
    params = random_net(1, (3, 3))
    x = np.array([[MASK, 1], [MASK, MASK]])
    a = denoiser.forward(params, x, 0.1)
    b = denoiser.forward(params, x, 0.9)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa, pb)


def test_time_conditioning_changes_output():
    params = random_net(1, (3, 3), time_conditioned=True)
    a = denoiser.forward(params, np.array([MASK, MASK]), 0.1)
    b = denoiser.forward(params, np.array([MASK, MASK]), 0.9)
    assert not np.allclose(a[0], b[0])


def _fd_check(params, x, t, upstream, h=1e-5):
    def objective(flat):
        lp = denoiser.log_probs(DenoiserParams(params.config, flat), x, t)
        return sum(np.sum(np.where(np.isfinite(l), g * l, 0.0)) for g, l in zip(upstream, lp))

    grad = denoiser.backward(params, x, t, upstream)
    fd = np.empty_like(grad)
    for i in range(grad.size):
        e = np.zeros_like(grad)
        e[i] = h
        fd[i] = (objective(params.flat + e) - objective(params.flat - e)) / (2 * h)
    return np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, 4))
    vocab = tuple(int(v) for v in rng.integers(2, 5, size=L))
    act = ("tanh", "relu")[seed % 2]
    params = denoiser.init(DenoiserConfig(vocab, (int(rng.integers(4, 17)),), seed % 3 == 0, act), rng)
    x = np.array([[rng.integers(-1, v) for v in vocab] for _ in range(3)])
    x[0] = MASK
    t = rng.random(3)
    upstream = [rng.normal(size=(3, v)) for v in vocab]
    assert _fd_check(params, x, t, upstream) < 1e-4


def test_backward_zero_upstream():
    params = random_net(2, (2, 3))
    g = denoiser.backward(params, np.array([MASK, MASK]), 0.0, [np.zeros(2), np.zeros(3)])
    np.testing.assert_array_equal(g, 0.0)


def test_carry_over_positions_have_no_gradient():
    params = random_net(3, (2, 3))
    x = np.array([1, 0])
    g = denoiser.backward(params, x, 0.0, [np.ones(2), np.ones(3)])
    np.testing.assert_array_equal(g, 0.0)


def test_target_log_probs_and_grad():
    rng = np.random.default_rng(4)
    params = random_net(4, (3, 2, 4))
    x0 = np.array([[2, 1, 0], [0, 0, 3]])
    x = np.array([[MASK, 1, MASK], [MASK, MASK, MASK]])
    coef = rng.normal(size=(2, 3))
    lp, g = denoiser.target_log_probs_and_grad(params, x, x0, 0.0, coef)
    np.testing.assert_array_equal(lp, denoiser.target_log_probs(params, x, x0))
    assert lp[0, 1] == 0.0
    h = 1e-6
    fd = np.empty_like(g)
    for i in range(g.size):
        e = np.zeros_like(g)
        e[i] = h
        up = denoiser.target_log_probs(DenoiserParams(params.config, params.flat + e), x, x0)
        dn = denoiser.target_log_probs(DenoiserParams(params.config, params.flat - e), x, x0)
        fd[i] = np.sum(coef * (up - dn)) / (2 * h)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        denoiser.forward(random_net(0, (2, 2)), np.array([0, 0, 0]))
