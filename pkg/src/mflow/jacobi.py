"""Cyclic Jacobi eigensolver for small dense symmetric matrices.

Certificate checks need eigenvalues of (M+N)x(M+N) quadratic forms and the
Euclidean oracle needs a full eigensystem; both matrices are tiny, so plain
cyclic-by-row Jacobi rotations converge in a handful of sweeps.
"""
import numpy as np


class JacobiConvergenceError(RuntimeError):
    """Off-diagonal mass failed to drop below tolerance within the sweep budget."""


def _check_symmetric(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.T)
    if asym > 1e-12 * max(scale, 1e-300):
        raise ValueError(
            f"matrix is not symmetric (relative asymmetry {asym / max(scale, 1e-300):.2e})")
    return 0.5 * (A + A.T)


def jacobi_eigensystem(A, tol=1e-12, max_sweeps=50):
    """Diagonalize a symmetric matrix: returns (eigenvalues, V) with
    A = V @ diag(eigenvalues) @ V.T, eigenvalues ascending.

    Rotations sweep the upper triangle cyclically until the off-diagonal
    Frobenius mass is below tol * ||A||_F; exceeding ``max_sweeps`` sweeps
    raises JacobiConvergenceError.
    """
    A = _check_symmetric(A)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    normA = np.linalg.norm(A)
    if normA == 0.0:
        return np.zeros(n), V

    def offdiag(M):
        off = M.copy()
        np.fill_diagonal(off, 0.0)
        return np.linalg.norm(off)

    for _ in range(max_sweeps):
        if offdiag(A) <= tol * normA:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-4 * tol * normA / n:
                    continue
                # rotation angle: tan(2 phi) = 2 a_pq / (a_qq - a_pp)
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                elif theta != 0.0:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                A[[p, q], :] = rot @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot.T
                V[:, [p, q]] = V[:, [p, q]] @ rot.T
    else:
        if offdiag(A) > tol * normA:
            raise JacobiConvergenceError(
                f"off-diagonal mass {offdiag(A):.3e} still above {tol:.1e} * ||A||_F "
                f"after {max_sweeps} sweeps")
    lam = A.diagonal().copy()
    order = np.argsort(lam)
    return lam[order], V[:, order]


def max_eigenvalue_symmetric(A, tol=1e-12) -> float:
    """Largest eigenvalue of a symmetric matrix, accurate to tol * ||A||_F."""
    lam, _ = jacobi_eigensystem(A, tol=tol)
    return float(lam[-1])
