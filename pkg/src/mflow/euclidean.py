"""Euclidean quadratic-energy space: closed-form stages and an exact flow.

With E(x) = x.Ax/2 + b.x and the plain Euclidean metric, every stage problem
is itself a positive-definite linear system, and the continuous flow has the
matrix-exponential solution.  Both are cheap and independent of the generic
stepping machinery, which makes this space the main correctness oracle.
"""
import numpy as np

from .jacobi import jacobi_eigensystem


class EuclideanQuadratic:
    """E(x) = x.Ax/2 + b.x on R^n; A must be symmetric."""

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        scale = max(np.linalg.norm(A), 1e-300)
        if np.linalg.norm(A - A.T) > 1e-12 * scale:
            raise ValueError("A must be symmetric")
        self.A = 0.5 * (A + A.T)
        self.b = b
        self.dimension = b.shape[0]

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ self.A @ x) + float(self.b @ x)

    def distance_squared(self, p, q) -> float:
        d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
        return float(d @ d)

    def stage_solve(self, coeffs, k, warm_start):
        """Minimize E(x) + (1/2k) sum_j g_j |x - anchor_j|^2 by solving the
        stationarity system (A + (s/k) I) x = -b + (1/k) sum_j g_j anchor_j,
        s = sum of the g_j."""
        s = 0.0
        rhs = -self.b.copy()
        for g, anchor in coeffs:
            g = float(g)
            s += g
            rhs += (g / k) * np.asarray(anchor, dtype=float)
        return np.linalg.solve(self.A + (s / k) * np.eye(self.dimension), rhs)


def euclidean_exact_flow(space: EuclideanQuadratic, u0, t: float):
    """exp(-A t)(u0 - x*) + x* with x* = -A^{-1} b, via Jacobi
    diagonalization; requires positive-definite A."""
    lam, V = jacobi_eigensystem(space.A, tol=1e-12)
    if lam[0] <= 1e-12 * max(abs(lam[-1]), 1.0):
        raise ValueError(
            f"exact flow needs positive-definite A; smallest eigenvalue is {lam[0]:.3e}")
    u0 = np.asarray(u0, dtype=float)
    xstar = -V @ ((V.T @ space.b) / lam)
    z = V.T @ (u0 - xstar)
    return V @ (np.exp(-lam * float(t)) * z) + xstar
