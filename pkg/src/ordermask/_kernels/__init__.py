"""Quadrature kernels: compiled when available, pure Python otherwise.

Set ``ORDERMASK_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _quad_py

BACKEND = "python"
subset_weight = _quad_py.subset_weight
order_prob = _quad_py.order_prob

if os.environ.get("ORDERMASK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _quad
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        subset_weight = _quad.subset_weight
        order_prob = _quad.order_prob

__all__ = ["BACKEND", "order_prob", "subset_weight"]
