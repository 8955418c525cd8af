"""1-D 2-Wasserstein metric-energy space in quantile coordinates.

Densities on [-1,1] are represented by their inverse CDF sampled at the
midpoints y_m = (m-1/2)/M_q, where the squared 2-Wasserstein distance is the
plain L2(0,1) distance.  Three energies are shipped: entropy (heat flow),
cubic (porous-medium flow) and cubic plus the external potential
V(x) = 2 + cos(pi x) (drift-diffusion flow).  Stage problems are solved by
projected descent in L2(0,1) with a Barzilai-Borwein step.
"""
import csv

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._backend import KERNELS

KIND_CODES = {"entropy": 0, "cubic": 1, "cubic_potential": 2}


class EnergyFunctional:
    """Tag selecting one of the three energies; carries the kernel code."""

    def __init__(self, kind: str):
        if kind not in KIND_CODES:
            raise ValueError(
                f"unknown energy kind {kind!r}; choose one of {sorted(KIND_CODES)}")
        self.kind = kind
        self.code = KIND_CODES[kind]

    def __repr__(self):
        return f"EnergyFunctional({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, EnergyFunctional) and other.kind == self.kind


def potential(x):
    """External potential V(x) = 2 + cos(pi x)."""
    return 2.0 + np.cos(np.pi * np.asarray(x, dtype=float))


def potential_derivative(x):
    return -np.pi * np.sin(np.pi * np.asarray(x, dtype=float))


class QuantileFunction:
    """Immutable monotone samples X_m of an inverse CDF at midpoints
    y_m = (m-1/2)/M_q, with values inside [-1, 1]."""

    __slots__ = ("values", "M_q")

    def __init__(self, values, monotone_tol: float = 1e-14):
        v = np.array(values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError("need a 1-D vector of at least 2 quantile samples")
        if np.any(np.diff(v) < -monotone_tol):
            worst = float(np.diff(v).min())
            raise ValueError(f"quantile samples must be nondecreasing "
                             f"(worst backward gap {worst:.3e})")
        if v[0] < -1.0 - 1e-12 or v[-1] > 1.0 + 1e-12:
            raise ValueError(
                f"quantile samples must lie in [-1, 1], got range "
                f"[{v[0]:.6g}, {v[-1]:.6g}]")
        v.flags.writeable = False
        self.values = v
        self.M_q = v.shape[0]

    def __len__(self):
        return self.M_q

    def midpoints(self):
        return (np.arange(self.M_q) + 0.5) / self.M_q


def _values(X):
    return X.values if isinstance(X, QuantileFunction) else np.asarray(X, dtype=float)


def w2_distance_squared(X, Y) -> float:
    """Midpoint quadrature (1/M_q) sum (X_m - Y_m)^2 of the squared
    2-Wasserstein distance between the two represented densities."""
    x, y = _values(X), _values(Y)
    if x.shape != y.shape:
        raise ValueError(f"resolution mismatch: {x.shape[0]} vs {y.shape[0]} samples")
    d = x - y
    return float(d @ d) / x.shape[0]


def energy(X, functional) -> float:
    """Energy of the density represented by X (cell quadrature of the
    quantile-coordinate formula)."""
    f = functional if isinstance(functional, EnergyFunctional) else EnergyFunctional(functional)
    return float(KERNELS.energy_value(_values(X), f.code))


def energy_gradient(X, functional):
    """L2(0,1) gradient of energy(., functional) at X."""
    f = functional if isinstance(functional, EnergyFunctional) else EnergyFunctional(functional)
    x = _values(X)
    if KERNELS.cell_slopes(x).min() <= 0.0:
        raise ValueError("energy gradient needs strictly increasing quantile samples")
    return np.asarray(KERNELS.energy_gradient(x, f.code))


def density_to_quantile(u, M_q: int, grid=None) -> QuantileFunction:
    """Invert density samples on a uniform x-grid into M_q quantile samples.

    The CDF is accumulated by the trapezoid rule and inverted by monotone
    linear interpolation.  The samples must be nonnegative with trapezoidal
    mass within 1e-8 of 1.
    """
    u = np.asarray(u, dtype=float)
    if grid is None:
        grid = np.linspace(-1.0, 1.0, u.shape[0])
    else:
        grid = np.asarray(grid, dtype=float)
    if u.shape != grid.shape or u.ndim != 1 or u.shape[0] < 2:
        raise ValueError("density and grid must be equal-length 1-D vectors")
    if np.any(u < 0.0):
        raise ValueError(f"density must be nonnegative, min sample {u.min():.3e}")
    dx = np.diff(grid)
    mass = float((0.5 * dx * (u[:-1] + u[1:])).sum())
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"density mass {mass:.10f} is not within 1e-8 of 1")
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * dx * (u[:-1] + u[1:]))))
    cdf /= cdf[-1]
    y = (np.arange(M_q) + 0.5) / M_q
    return QuantileFunction(np.interp(y, cdf, grid))


_FD_CACHE = {}


def _fd_weights(z, x, m):
    """Finite-difference weights for the m-th derivative at z on nodes x
    (Fornberg's recurrence)."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[i, kk] = c1 * (kk * c[i - 1, kk - 1] - c5 * c[i - 1, kk]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for kk in range(mn, 0, -1):
                c[j, kk] = (c4 * c[j, kk] - kk * c[j, kk - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _knot_deriv_stencils(M_q, width=5):
    """First-derivative stencils at the knots [0, y_1..y_Mq, 1]."""
    if M_q in _FD_CACHE:
        return _FD_CACHE[M_q]
    yk = np.concatenate(([0.0], (np.arange(M_q) + 0.5) / M_q, [1.0]))
    nk = M_q + 2
    width = min(width, nk)
    starts = np.empty(nk, dtype=np.int64)
    W = np.empty((nk, width))
    for j in range(nk):
        s0 = min(max(j - width // 2, 0), nk - width)
        starts[j] = s0
        W[j] = _fd_weights(yk[j], yk[s0:s0 + width], 1)
    _FD_CACHE[M_q] = (starts, W)
    return starts, W


def quantile_to_density(X, grid):
    """Density u(x) = 1/X'(y at x) of the represented measure, evaluated on
    the given x-grid: high-order knot derivatives of the extended samples
    [-1, X, 1] followed by shape-preserving cubic interpolation in x."""
    x = _values(X)
    M_q = x.shape[0]
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("density reconstruction needs strictly increasing samples")
    Xk = np.concatenate(([-1.0], x, [1.0]))
    starts, W = _knot_deriv_stencils(M_q)
    cols = starts[:, None] + np.arange(W.shape[1])[None, :]
    pk = (W * Xk[cols]).sum(axis=1)
    if np.any(pk <= 0.0):
        raise ValueError("reconstructed slope is nonpositive at a knot")
    return PchipInterpolator(Xk, 1.0 / pk)(np.asarray(grid, dtype=float))


def exact_heat_solution(t, grid):
    """Closed-form heat-flow density 1/2 + (1/4) cos(pi x) e^{-pi^2 t}; at
    t = 0 this is the initial condition shared by all three experiments."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    x = np.asarray(grid, dtype=float)
    return 0.5 + 0.25 * np.cos(np.pi * x) * np.exp(-np.pi * np.pi * float(t))


def exact_heat_quantile(t, M_q: int) -> QuantileFunction:
    """Quantile samples of the closed-form heat-flow density, solved from the
    CDF equation by Newton iteration to machine accuracy."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    amp = 0.25 * np.exp(-np.pi * np.pi * float(t))
    y = (np.arange(M_q) + 0.5) / M_q
    X = 2.0 * y - 1.0
    for _ in range(80):
        r = 0.5 * (X + 1.0) + amp * np.sin(np.pi * X) / np.pi - y
        X -= r / (0.5 + amp * np.cos(np.pi * X))
        if np.max(np.abs(r)) < 1e-15:
            break
    return QuantileFunction(X)


def initial_quantile(M_q: int) -> QuantileFunction:
    """Quantile samples of the shared initial density 1/2 + (1/4) cos(pi x)."""
    return exact_heat_quantile(0.0, M_q)


def _stage_objective(kernels, X, kind, anchors, gammas, k):
    M = X.shape[0]
    e = kernels.energy_value(X, kind)
    lim = 0.0
    for g, A in zip(gammas, anchors):
        d = X - A
        lim += g * (d @ d)
    return e + lim / (2.0 * k * M)


def _minimize_stage(kernels, kind, anchors, gammas, k, warm,
                    xtol=1e-12, max_iter=100000):
    """Minimize energy + (1/2k) sum gamma_j W2^2(X, X_j) from the warm start.

    Phase 1 is Armijo-backtracked Barzilai-Borwein descent with PAV
    monotonicity projection; once the gradient is small (or the objective is
    flat to machine precision) phase 2 polishes on the gradient norm alone,
    guarded by a nonmonotone window.  Returns (X, stats).
    """
    s = float(sum(gammas))
    comb = np.zeros_like(warm)
    for g, A in zip(gammas, anchors):
        comb += g * A
    mu = s / k
    gnorm_stop = max(1e-14, xtol * mu)

    X = warm.copy()
    M = X.shape[0]
    F = _stage_objective(kernels, X, kind, anchors, gammas, k)
    if not np.isfinite(F):
        raise ValueError("infeasible warm start (nonpositive cell slope)")
    g = np.asarray(kernels.energy_gradient(X, kind)) + (s * X - comb) / k
    eta = k / s
    n_eval = 0
    flat = 0
    g_switch = max(1e-5 * mu, gnorm_stop)
    it = 0
    # phase 1: descend on the objective until the quadratic basin
    while it < max_iter:
        gn2 = (g @ g) / M
        if np.sqrt(gn2) <= g_switch:
            break
        accepted = False
        for _ in range(60):
            Xt = X - eta * g
            if np.any(np.diff(Xt) < 0):
                kernels.pav_inplace(Xt)
            Ft = _stage_objective(kernels, Xt, kind, anchors, gammas, k)
            n_eval += 1
            if np.isfinite(Ft) and Ft <= F - 1e-4 * eta * gn2:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        if F - Ft <= 1e-15 * (1.0 + abs(F)):
            flat += 1
        else:
            flat = 0
        gt = np.asarray(kernels.energy_gradient(Xt, kind)) + (s * Xt - comb) / k
        sx = Xt - X
        yg = gt - g
        sy = (sx @ yg) / M
        ss = (sx @ sx) / M
        X, F, g = Xt, Ft, gt
        it += 1
        if sy > 1e-300:
            eta = min(max(ss / sy, 1e-10 / mu), 1e10 / mu)
        else:
            eta *= 2.0
        if flat >= 60:
            break
    # phase 2: the objective is float-blind near the minimizer; polish the
    # gradient norm, keeping the best iterate and a nonmonotone safeguard
    F_entry, X_entry = F, X
    gn = np.sqrt((g @ g) / M)
    best_X, best_gn = X, gn
    window = [gn] * 8
    while it < max_iter:
        if gn <= gnorm_stop:
            return X, {"iters": it, "evals": n_eval, "stop": "gtol", "F": F}
        wmax = max(window)
        accepted = False
        for _ in range(60):
            Xt = X - eta * g
            if np.any(np.diff(Xt) < 0):
                kernels.pav_inplace(Xt)
            if np.asarray(kernels.cell_slopes(Xt)).min() <= 0.0:
                eta *= 0.5
                continue
            gt = np.asarray(kernels.energy_gradient(Xt, kind)) + (s * Xt - comb) / k
            n_eval += 1
            gnt = np.sqrt((gt @ gt) / M)
            if gnt <= 10.0 * wmax:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        sx = Xt - X
        yg = gt - g
        sy = (sx @ yg) / M
        ss = (sx @ sx) / M
        X, g, gn = Xt, gt, gnt
        it += 1
        window.pop(0)
        window.append(gn)
        if gn < best_gn:
            best_X, best_gn = X, gn
        if sy > 1e-300:
            eta = min(max(ss / sy, 1e-10 / mu), 1e10 / mu)
        else:
            eta *= 2.0
    X = best_X
    F = _stage_objective(kernels, X, kind, anchors, gammas, k)
    if F - F_entry > 1e-13 * (1.0 + abs(F_entry)):
        # polishing drifted uphill; fall back to the phase-2 entry point
        X, F = X_entry, F_entry
        best_gn = np.nan
    stop = "gtol" if best_gn <= gnorm_stop else "polish"
    return X, {"iters": it, "evals": n_eval, "stop": stop, "F": F}


class Wasserstein1D:
    """Metric-energy space of densities on [-1,1] for one of the three
    energies; points are QuantileFunction instances."""

    def __init__(self, functional, kernels=None, xtol=1e-12, max_iter=100000):
        self.functional = (functional if isinstance(functional, EnergyFunctional)
                           else EnergyFunctional(functional))
        self.kernels = KERNELS if kernels is None else kernels
        self.xtol = xtol
        self.max_iter = max_iter
        self.last_stats = None

    def energy(self, X) -> float:
        return float(self.kernels.energy_value(_values(X), self.functional.code))

    def distance_squared(self, p, q) -> float:
        return w2_distance_squared(p, q)

    def stage_solve(self, coeffs, k, warm_start) -> QuantileFunction:
        gammas = [float(g) for g, _ in coeffs]
        anchors = [_values(a) for _, a in coeffs]
        M_q = anchors[0].shape[0]
        for a in anchors:
            if a.shape[0] != M_q:
                raise ValueError("stage anchors must share one resolution")
        warm = _values(warm_start)
        f_warm = _stage_objective(self.kernels, warm, self.functional.code,
                                  anchors, gammas, k)
        X, stats = _minimize_stage(self.kernels, self.functional.code, anchors,
                                   gammas, k, warm, xtol=self.xtol,
                                   max_iter=self.max_iter)
        if stats["F"] > f_warm + 1e-12 * (1.0 + abs(f_warm)):
            raise RuntimeError(
                f"stage minimization worsened the warm start "
                f"({stats['F']:.17g} > {f_warm:.17g}, stop={stats['stop']})")
        self.last_stats = stats
        return QuantileFunction(X)


def write_density_csv(path, grid, u):
    """Columns (x, u), 17 significant digits."""
    grid = np.asarray(grid, dtype=float)
    u = np.asarray(u, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "u"])
        for xv, uv in zip(grid, u):
            writer.writerow([f"{xv:.17g}", f"{uv:.17g}"])


def read_density_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["x", "u"]:
        raise ValueError(f"expected header x,u in {path}, got {rows[0]}")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return data[:, 0], data[:, 1]


def write_quantile_csv(path, X):
    """Columns (y, X), 17 significant digits."""
    X = _values(X)
    y = (np.arange(X.shape[0]) + 0.5) / X.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "X"])
        for yv, xv in zip(y, X):
            writer.writerow([f"{yv:.17g}", f"{xv:.17g}"])


def read_quantile_csv(path) -> QuantileFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["y", "X"]:
        raise ValueError(f"expected header y,X in {path}, got {rows[0]}")
    return QuantileFunction([float(b) for _, b in rows[1:]])
