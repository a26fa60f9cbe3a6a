import importlib

import pytest

from ordermask import _kernels
from ordermask._kernels import _quad_py

backends = [_quad_py]
try:
    from ordermask._kernels import _quad

    backends.append(_quad)
except ImportError:
    _quad = None


@pytest.mark.parametrize("mod", backends)
def test_order_prob(mod):
    assert mod.order_prob([1.0, 2.0], 1e-10) == pytest.approx(2 / 3, abs=1e-9)
    assert mod.order_prob([1.0, 1.0, 1.0], 1e-10) == pytest.approx(1 / 6, abs=1e-9)
    assert mod.order_prob([0.05, 20.0], 1e-10) == pytest.approx(20 / 20.05, abs=1e-8)


@pytest.mark.parametrize("mod", backends)
def test_subset_weight(mod):
    # one other masked position with equal weight: int_0^1 w t^(2w-1) dt = 1/2
    assert mod.subset_weight(1.5, [1.5], [], 0.0, 1e-12) == pytest.approx(0.5, abs=1e-10)
    # one observed position, both linear: int_0^1 (1 - t) dt = 1/2
    assert mod.subset_weight(1.0, [], [1.0], 0.0, 1e-12) == pytest.approx(0.5, abs=1e-10)
    # restricted domain: int_lo^1 2t dt = 1 - lo^2
    assert mod.subset_weight(2.0, [], [], 0.1, 1e-12) == pytest.approx(0.99, abs=1e-10)


@pytest.mark.skipif(_quad is None, reason="compiled kernels not built")
def test_backends_agree():
    w = [0.4, 1.3, 2.2, 0.9]
    assert _quad.order_prob(w, 1e-9) == pytest.approx(_quad_py.order_prob(w, 1e-9), abs=1e-12)
    args = (0.7, [1.1, 0.3], [2.0, 0.6], 1e-4, 1e-11)
    assert _quad.subset_weight(*args) == pytest.approx(_quad_py.subset_weight(*args), abs=1e-14)


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("ORDERMASK_PURE_PYTHON", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.order_prob is _quad_py.order_prob
    finally:
        monkeypatch.delenv("ORDERMASK_PURE_PYTHON")
        importlib.reload(_kernels)
