"""Pure-Python adaptive Simpson kernels (fallback for ``_quad``).

Both integrals are evaluated after the substitution ``v = t**w`` for the
outermost exponent, which turns the power-law density into a bounded
integrand on ``[lo, 1]``.
"""

from __future__ import annotations

MAX_DEPTH = 50


def _asimpson(f, a, b, tol):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _rec(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)


def _rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return _rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + _rec(
        f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1
    )


def subset_weight(w_target, masked_w, unmasked_w, t_lo, tol):
    """``int_{t_lo}^1 w t^(w-1) prod_masked t^wj prod_unmasked (1 - t^wj) dt``."""
    inv = 1.0 / w_target
    r = sum(masked_w) * inv
    exps = [wj * inv for wj in unmasked_w]

    def f(v):
        out = v**r
        for e in exps:
            out *= 1.0 - v**e
        return out

    lo = t_lo**w_target if t_lo > 0.0 else 0.0
    return _asimpson(f, lo, 1.0, tol)


def order_prob(w_in_order, tol):
    """``P(t_0 < t_1 < ... < t_{n-1})`` for independent ``t_k`` with CDF ``t**w_k``.

    Nested integration: ``G_k(s) = int_s^1 f_k(t) G_{k+1}(t) dt`` with the
    innermost survival ``G_{n-1}(s) = 1 - s**w_{n-1}`` in closed form.
    """
    w = [float(x) for x in w_in_order]
    n = len(w)
    if n == 1:
        return 1.0

    def G(k, s):
        if k == n - 1:
            return 1.0 - s ** w[k]
        inv = 1.0 / w[k]
        lo = s ** w[k] if s > 0.0 else 0.0
        if lo >= 1.0:
            return 0.0
        return _asimpson(lambda v: G(k + 1, v**inv), lo, 1.0, tol)

    return G(0, 0.0)
