# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled adaptive Simpson kernels; same algorithm as ``_quad_py``."""

from libc.math cimport fabs, pow
from libc.stdlib cimport malloc, free

cdef enum:
    MAX_DEPTH = 50
    MAX_DIM = 64

ctypedef double (*integrand_t)(void* ctx, int level, double x) noexcept nogil


cdef double _rec(integrand_t f, void* ctx, int level, double a, double b,
                 double fa, double fm, double fb, double whole,
                 double tol, int depth) noexcept nogil:
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm = f(ctx, level, lm)
    cdef double frm = f(ctx, level, rm)
    cdef double left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    cdef double right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    cdef double delta = left + right - whole
    if depth <= 0 or fabs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_rec(f, ctx, level, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _rec(f, ctx, level, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


cdef double _asimpson(integrand_t f, void* ctx, int level, double a, double b,
                      double tol) noexcept nogil:
    cdef double fa = f(ctx, level, a)
    cdef double fm = f(ctx, level, 0.5 * (a + b))
    cdef double fb = f(ctx, level, b)
    cdef double whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _rec(f, ctx, level, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)


# --- subset weights -------------------------------------------------------

cdef struct SubsetCtx:
    double r
    int n
    double* exps


cdef double _subset_f(void* ctx, int level, double v) noexcept nogil:
    cdef SubsetCtx* c = <SubsetCtx*> ctx
    cdef double out = pow(v, c.r)
    cdef int i
    for i in range(c.n):
        out *= 1.0 - pow(v, c.exps[i])
    return out


def subset_weight(double w_target, masked_w, unmasked_w, double t_lo, double tol):
    """``int_{t_lo}^1 w t^(w-1) prod_masked t^wj prod_unmasked (1 - t^wj) dt``."""
    cdef double inv = 1.0 / w_target
    cdef SubsetCtx c
    cdef double buf[MAX_DIM]
    cdef int i = 0
    cdef double lo
    c.r = 0.0
    for wj in masked_w:
        c.r += wj
    c.r *= inv
    for wj in unmasked_w:
        if i >= MAX_DIM:
            raise ValueError("too many positions for the compiled kernel")
        buf[i] = wj * inv
        i += 1
    c.n = i
    c.exps = buf
    lo = pow(t_lo, w_target) if t_lo > 0.0 else 0.0
    with nogil:
        out = _asimpson(_subset_f, &c, 0, lo, 1.0, tol)
    return out


# --- nested order probabilities ------------------------------------------

cdef struct NestCtx:
    int n
    double* w
    double tol


cdef double _nest_G(NestCtx* c, int k, double s) noexcept nogil:
    cdef double lo
    if k == c.n - 1:
        return 1.0 - pow(s, c.w[k])
    lo = pow(s, c.w[k]) if s > 0.0 else 0.0
    if lo >= 1.0:
        return 0.0
    return _asimpson(_nest_f, c, k, lo, 1.0, c.tol)


cdef double _nest_f(void* ctx, int k, double v) noexcept nogil:
    cdef NestCtx* c = <NestCtx*> ctx
    return _nest_G(c, k + 1, pow(v, 1.0 / c.w[k]))


def order_prob(w_in_order, double tol):
    """``P(t_0 < t_1 < ... < t_{n-1})`` for independent ``t_k`` with CDF ``t**w_k``."""
    cdef int n = len(w_in_order)
    cdef NestCtx c
    cdef int i
    cdef double out
    if n == 1:
        return 1.0
    c.n = n
    c.tol = tol
    c.w = <double*> malloc(n * sizeof(double))
    if c.w == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            c.w[i] = w_in_order[i]
        with nogil:
            out = _nest_G(&c, 0, 0.0)
    finally:
        free(c.w)
    return out
