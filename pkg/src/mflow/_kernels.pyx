# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the quantile-coordinate solver; exports the same
five functions as _kernels_py with identical semantics."""
import numpy as np

cimport cython
from libc.math cimport INFINITY, M_PI, cos, log, sin

ENTROPY, CUBIC, CUBIC_POT = 0, 1, 2


def cell_slopes(const double[::1] X, out=None):
    """Slopes of the piecewise-linear interpolant through (0,-1),
    (y_m, X_m), (1,1); the half-width boundary cells come first and last.
    Returns M+1 values."""
    cdef Py_ssize_t M = X.shape[0]
    if out is None:
        out = np.empty(M + 1)
    cdef double[::1] p = out
    cdef Py_ssize_t m
    p[0] = (X[0] + 1.0) * (2.0 * M)
    for m in range(1, M):
        p[m] = (X[m] - X[m - 1]) * M
    p[M] = (1.0 - X[M - 1]) * (2.0 * M)
    return out


def energy_value(const double[::1] X, int kind):
    """Cell quadrature of the energy; +inf when any slope is nonpositive
    (the integrand is undefined there)."""
    cdef Py_ssize_t M = X.shape[0]
    cdef Py_ssize_t c
    cdef double acc = 0.0
    cdef double p, w
    for c in range(M + 1):
        if c == 0:
            p = (X[0] + 1.0) * (2.0 * M)
        elif c == M:
            p = (1.0 - X[M - 1]) * (2.0 * M)
        else:
            p = (X[c] - X[c - 1]) * M
        if p <= 0.0:
            return INFINITY
        w = 0.5 if (c == 0 or c == M) else 1.0
        if kind == 0:
            acc += -w * log(p)
        else:
            acc += 0.5 * w / (p * p)
    acc /= M
    if kind == 2:
        for c in range(M):
            acc += (2.0 + cos(M_PI * X[c])) / M
    return acc


def energy_gradient(const double[::1] X, int kind, out=None):
    """L2(0,1) gradient of energy_value; the cell form telescopes to
    g_m = M*(phi'(p_m) - phi'(p_{m+1})).  Slopes must be positive."""
    cdef Py_ssize_t M = X.shape[0]
    if out is None:
        out = np.empty(M)
    cdef double[::1] g = out
    cdef Py_ssize_t m
    cdef double p, q_left, q_right
    p = (X[0] + 1.0) * (2.0 * M)
    q_left = -1.0 / p if kind == 0 else -1.0 / (p * p * p)
    for m in range(M):
        if m == M - 1:
            p = (1.0 - X[M - 1]) * (2.0 * M)
        else:
            p = (X[m + 1] - X[m]) * M
        q_right = -1.0 / p if kind == 0 else -1.0 / (p * p * p)
        g[m] = (q_left - q_right) * M
        q_left = q_right
    if kind == 2:
        for m in range(M):
            g[m] += -M_PI * sin(M_PI * X[m])
    return out


def stage_gradient(const double[::1] X, int kind, const double[::1] comb_over_k,
                   double s_over_k, out=None):
    """Gradient of the stage objective: energy gradient plus the movement
    limiter s_over_k*X - comb_over_k (comb_over_k = (1/k) sum gamma_j X_j)."""
    cdef Py_ssize_t M = X.shape[0]
    out = energy_gradient(X, kind, out=out)
    cdef double[::1] g = out
    cdef Py_ssize_t m
    for m in range(M):
        g[m] += s_over_k * X[m] - comb_over_k[m]
    return out


def pav_inplace(double[::1] X):
    """Project X onto nondecreasing vectors in place (pool adjacent
    violators, unit weights)."""
    cdef Py_ssize_t n = X.shape[0]
    vals_arr = np.empty(n)
    cnts_arr = np.empty(n, dtype=np.intp)
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t[::1] cnts = cnts_arr
    cdef Py_ssize_t top = 0, i, c, t, pos, j
    cdef double v
    for i in range(n):
        v = X[i]
        c = 1
        while top > 0 and vals[top - 1] >= v:
            top -= 1
            v = (vals[top] * cnts[top] + v * c) / (cnts[top] + c)
            c += cnts[top]
        vals[top] = v
        cnts[top] = c
        top += 1
    pos = 0
    for t in range(top):
        for j in range(cnts[t]):
            X[pos + j] = vals[t]
        pos += cnts[t]
    return np.asarray(X)
