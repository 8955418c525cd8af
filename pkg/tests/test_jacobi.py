"""Cyclic Jacobi eigensolver for the certificate spectra."""
import numpy as np
import pytest

from mflow.jacobi import (JacobiConvergenceError, jacobi_eigensystem,
                          max_eigenvalue_symmetric)


def test_identity():
    lam, V = jacobi_eigensystem(np.eye(5))
    assert np.allclose(lam, 1.0)
    assert max_eigenvalue_symmetric(np.eye(5)) == pytest.approx(1.0)


def test_zero_matrix():
    lam, _ = jacobi_eigensystem(np.zeros((4, 4)))
    assert np.allclose(lam, 0.0)


def test_single_edge_laplacian():
    # -(e0 - e1)(e0 - e1)^T has spectrum {-2, 0}
    A = np.array([[-1.0, 1.0], [1.0, -1.0]])
    lam, _ = jacobi_eigensystem(A)
    assert np.allclose(lam, [-2.0, 0.0])
    assert max_eigenvalue_symmetric(A) == pytest.approx(0.0, abs=1e-14)


def test_eigenvalues_sorted_ascending():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((7, 7))
    A = A + A.T
    lam, _ = jacobi_eigensystem(A)
    assert np.all(np.diff(lam) >= 0)


def test_against_library_eigensolver():
    """Dual route: random symmetric matrices against numpy's eigvalsh."""
    rng = np.random.default_rng(7)
    for n in (2, 3, 5, 9, 12):
        for _ in range(20):
            A = rng.standard_normal((n, n))
            A = (A + A.T) / 2
            lam, _ = jacobi_eigensystem(A)
            ref = np.linalg.eigvalsh(A)
            scale = max(1.0, np.abs(ref).max())
            assert np.abs(lam - ref).max() <= 1e-10 * scale


def test_eigenvector_reconstruction():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((8, 8))
    A = (A + A.T) / 2
    lam, V = jacobi_eigensystem(A)
    err = np.linalg.norm(V @ np.diag(lam) @ V.T - A)
    assert err <= 1e-10 * np.linalg.norm(A)
    assert np.allclose(V @ V.T, np.eye(8), atol=1e-12)


def test_rejects_asymmetric():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        jacobi_eigensystem(A)


def test_rejects_nonsquare():
    with pytest.raises(ValueError):
        jacobi_eigensystem(np.ones((2, 3)))


def test_convergence_error_when_no_sweeps_allowed():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(JacobiConvergenceError):
        jacobi_eigensystem(A, max_sweeps=0)


def test_tiny_offdiagonal_entries_converge():
    """Widely spread diagonal with tiny couplings used to stall the
    off-diagonal measurement; it must converge cleanly."""
    rng = np.random.default_rng(5)
    d = np.array([1e-8, 1.0, 1e8])
    A = np.diag(d) + 1e-12 * rng.standard_normal((3, 3))
    A = (A + A.T) / 2
    lam, _ = jacobi_eigensystem(A)
    ref = np.linalg.eigvalsh(A)
    assert np.abs(lam - ref).max() <= 1e-8 * np.abs(ref).max()
