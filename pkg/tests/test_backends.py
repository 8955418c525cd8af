"""Compiled-extension vs pure-python kernel agreement and selection."""
import numpy as np
import pytest

from mflow import _backend, _kernels_py
from mflow._backend import select_backend
from mflow.wasserstein import (QuantileFunction, Wasserstein1D,
                               initial_quantile, w2_distance_squared)

HAVE_EXT = _backend._kernels_ext is not None


def random_monotone(rng, M):
    gaps = rng.uniform(0.1, 1.0, M + 1)
    c = np.cumsum(gaps)
    return -1.0 + 2.0 * c[:-1] / c[-1]


def test_select_numpy():
    mod, name = select_backend("numpy")
    assert name == "numpy" and mod is _kernels_py


def test_select_env(monkeypatch):
    monkeypatch.setenv("MFLOW_BACKEND", "numpy")
    assert select_backend()[1] == "numpy"
    monkeypatch.setenv("MFLOW_BACKEND", "fortran")
    with pytest.raises(ValueError, match="unknown backend"):
        select_backend()


def test_select_cython():
    if HAVE_EXT:
        mod, name = select_backend("cython")
        assert name == "cython" and mod is _backend._kernels_ext
        assert select_backend("auto")[1] == "cython"
    else:
        with pytest.raises(RuntimeError, match="not available"):
            select_backend("cython")


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_kernel_agreement_random_inputs():
    ext = _backend._kernels_ext
    rng = np.random.default_rng(3)
    for M in (2, 5, 64, 257):
        X = random_monotone(rng, M)
        p_py = np.asarray(_kernels_py.cell_slopes(X))
        p_cy = np.asarray(ext.cell_slopes(X))
        assert np.max(np.abs(p_py - p_cy)) <= 1e-13
        for kind in (0, 1, 2):
            e_py = _kernels_py.energy_value(X, kind)
            e_cy = ext.energy_value(X, kind)
            assert abs(e_py - e_cy) <= 1e-12 * max(1.0, abs(e_py))
            g_py = np.asarray(_kernels_py.energy_gradient(X, kind))
            g_cy = np.asarray(ext.energy_gradient(X, kind))
            scale = np.max(np.abs(g_py)) + 1.0
            assert np.max(np.abs(g_py - g_cy)) <= 1e-12 * scale


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_kernel_infinite_energy_guard():
    ext = _backend._kernels_ext
    X = np.array([-0.5, -0.5, 0.5])      # zero-width cell
    assert _kernels_py.energy_value(X, 0) == np.inf
    assert ext.energy_value(X, 0) == np.inf


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_pav_agreement():
    ext = _backend._kernels_ext
    rng = np.random.default_rng(11)
    for _ in range(20):
        raw = rng.standard_normal(40).cumsum()
        raw += 0.5 * rng.standard_normal(40)          # break monotonicity
        a = raw.copy()
        b = raw.copy()
        _kernels_py.pav_inplace(a)
        ext.pav_inplace(b)
        assert np.max(np.abs(a - b)) <= 1e-12
        assert np.all(np.diff(a) >= -1e-14)


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_kernels_accept_readonly_arrays():
    """Frozen QuantileFunction storage must be usable by both backends."""
    X = initial_quantile(64).values
    assert not X.flags.writeable
    ext = _backend._kernels_ext
    for kind in (0, 1, 2):
        assert np.isfinite(ext.energy_value(X, kind))
        assert np.isfinite(_kernels_py.energy_value(X, kind))
        np.asarray(ext.energy_gradient(X, kind))
    np.asarray(ext.cell_slopes(X))


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_stage_solve_cross_backend():
    """A full stage problem solved under each backend lands on the same
    minimizer even though the iteration paths may differ."""
    spaces = {name: Wasserstein1D("cubic_potential",
                                  kernels=select_backend(name)[0])
              for name in ("numpy", "cython")}
    X0 = initial_quantile(128)
    coeffs = [(4.0, X0.values), (-1.0, X0.values),
              (5.0, 0.99 * X0.values)]
    k = 1.0 / 256
    outs = {name: sp.stage_solve(coeffs, k, X0)
            for name, sp in spaces.items()}
    a = np.asarray(outs["numpy"].values if hasattr(outs["numpy"], "values")
                   else outs["numpy"])
    b = np.asarray(outs["cython"].values if hasattr(outs["cython"], "values")
                   else outs["cython"])
    dev = np.sqrt(w2_distance_squared(a, b))
    assert dev <= 1e-11


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
def test_stage_gradient_kernel_agreement():
    ext = _backend._kernels_ext
    rng = np.random.default_rng(21)
    M = 96
    X = random_monotone(rng, M)
    comb = random_monotone(rng, M) * 3.0
    for kind in (0, 1, 2):
        g_py = np.asarray(_kernels_py.stage_gradient(X, kind, comb, 7.5))
        g_cy = np.asarray(ext.stage_gradient(X, kind, comb, 7.5))
        scale = np.max(np.abs(g_py)) + 1.0
        assert np.max(np.abs(g_py - g_cy)) <= 1e-12 * scale
