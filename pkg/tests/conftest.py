import numpy as np
import pytest

from ordermask import denoiser
from ordermask.denoiser import DenoiserConfig


def random_net(seed, vocab_sizes, hidden=(16,), scale=2.0, time_conditioned=False):
    """A small untrained net with sharpened outputs so losses are not flat."""
    rng = np.random.default_rng(seed)
    params = denoiser.init(DenoiserConfig(vocab_sizes, hidden, time_conditioned), rng)
    params.flat *= scale
    return params


def uniform_net(vocab_sizes):
    return denoiser.zeros(DenoiserConfig(vocab_sizes, (4,)))


def memorizing_net(row, vocab_sizes, strength=60.0):
    """Output biases put (numerically) all mass on ``row``; weights are zero."""
    params = denoiser.zeros(DenoiserConfig(vocab_sizes, (4,)))
    _, b = params.layers()[-1]
    offsets = np.concatenate([[0], np.cumsum(vocab_sizes)])
    for pos, tok in enumerate(row):
        b[offsets[pos] + tok] = strength
    return params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
