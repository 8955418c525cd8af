"""Numpy reference kernels for the quantile-coordinate solver.

The compiled extension (_kernels.pyx) exports the same five functions with
identical semantics; either module can back the Wasserstein space.  kind
codes: 0 = entropy, 1 = cubic, 2 = cubic plus external potential.
"""
import numpy as np

ENTROPY, CUBIC, CUBIC_POT = 0, 1, 2


def cell_slopes(X, out=None):
    """Slopes of the piecewise-linear interpolant through (0,-1),
    (y_m, X_m), (1,1); the half-width boundary cells come first and last.
    Returns M+1 values."""
    M = X.shape[0]
    if out is None:
        out = np.empty(M + 1)
    out[0] = (X[0] + 1.0) * (2.0 * M)
    np.subtract(X[1:], X[:-1], out=out[1:M])
    out[1:M] *= M
    out[M] = (1.0 - X[M - 1]) * (2.0 * M)
    return out


def energy_value(X, kind):
    """Cell quadrature of the energy; +inf when any slope is nonpositive
    (the integrand is undefined there)."""
    M = X.shape[0]
    p = cell_slopes(X)
    if p.min() <= 0.0:
        return np.inf
    if kind == ENTROPY:
        e = -(np.log(p).sum() - 0.5 * (np.log(p[0]) + np.log(p[M]))) / M
    else:
        q = p ** -2
        e = 0.5 * (q.sum() - 0.5 * (q[0] + q[M])) / M
        if kind == CUBIC_POT:
            e += (2.0 + np.cos(np.pi * X)).sum() / M
    return float(e)


def energy_gradient(X, kind, out=None):
    """L2(0,1) gradient of energy_value; the cell form telescopes to
    g_m = M*(phi'(p_m) - phi'(p_{m+1})).  Slopes must be positive."""
    M = X.shape[0]
    p = cell_slopes(X)
    if kind == ENTROPY:
        q = -1.0 / p
    else:
        q = -(p ** -3.0)
    if out is None:
        out = np.empty(M)
    np.subtract(q[:-1], q[1:], out=out)
    out *= M
    if kind == CUBIC_POT:
        out += -np.pi * np.sin(np.pi * X)
    return out


def stage_gradient(X, kind, comb_over_k, s_over_k, out=None):
    """Gradient of the stage objective: energy gradient plus the movement
    limiter s_over_k*X - comb_over_k (comb_over_k = (1/k) sum gamma_j X_j)."""
    out = energy_gradient(X, kind, out=out)
    out += s_over_k * X
    out -= comb_over_k
    return out


def pav_inplace(X):
    """Project X onto nondecreasing vectors in place (pool adjacent
    violators, unit weights)."""
    n = X.shape[0]
    vals = np.empty(n)
    cnts = np.empty(n, dtype=np.intp)
    top = 0
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
        X[pos:pos + cnts[t]] = vals[t]
        pos += cnts[t]
    return X
