"""Convergence studies and energy traces for the shipped schemes.

Builds reference solutions (closed form, exact flow, or step-halving
proxies), runs the time stepper over a list of step counts, and reports
relative L2 errors with fitted convergence orders.  Table rows can run
in parallel; MFLOW_THREADS caps the worker count.
"""
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from .euclidean import EuclideanQuadratic, euclidean_exact_flow
from .flow import run
from .schemes import as_fraction, builtin_scheme, builtin_scheme_names, read_scheme_file
from .wasserstein import (Wasserstein1D, exact_heat_solution, initial_quantile,
                          quantile_to_density)

PROBLEMS = ("heat", "pme", "fokker_planck", "euclidean_quadratic")
PDE_PROBLEMS = ("heat", "pme", "fokker_planck")

# energy functional driving each density evolution
PDE_FUNCTIONAL = {
    "heat": "entropy",
    "pme": "cubic",
    "fokker_planck": "cubic_potential",
}

DEFAULT_FINAL_TIME = {
    "heat": Fraction(1, 16),
    "pme": Fraction(1, 8),
    "fokker_planck": Fraction(1, 8),
    "euclidean_quadratic": Fraction(1, 4),
}

DEFAULT_STEP_COUNTS = {
    ("heat", "stage3_order2"): (4, 6, 8, 12, 16, 24),
    ("heat", "diag7_order3"): (4, 6, 8, 12, 16, 24),
    ("pme", "stage3_order2"): (4, 6, 8, 12, 16, 24, 32),
    ("pme", "diag7_order3"): (4, 6, 8, 12, 16, 24, 32),
    ("fokker_planck", "stage3_order2"): (6, 8, 12, 16, 24, 32, 48),
    ("fokker_planck", "diag7_order3"): (8, 12, 16, 24, 32, 48, 64),
    ("euclidean_quadratic", "stage3_order2"): (8, 16, 32, 64, 128),
    ("euclidean_quadratic", "diag7_order3"): (8, 16, 32, 64, 128),
}

# Reference relative-L2 error digits for the shipped convergence studies,
# keyed by (problem, scheme) and aligned with the default step counts.
# Used as factor-level anchors by the regression suite.  The pme/stage3
# entry at n=16 is 1.10e-5; the source listing shows 1.10e-6, which would
# break monotone second-order decay between its neighbours, so the
# exponent is treated as a misprint.
REFERENCE_ERRORS = {
    ("heat", "stage3_order2"): (
        (4, 1.27e-4), (6, 5.56e-5), (8, 3.11e-5),
        (12, 1.37e-5), (16, 7.64e-6), (24, 3.39e-6)),
    ("heat", "diag7_order3"): (
        (4, 9.28e-6), (6, 2.63e-6), (8, 1.08e-6),
        (12, 3.18e-7), (16, 1.35e-7), (24, 4.19e-8)),
    ("pme", "stage3_order2"): (
        (4, 1.78e-4), (6, 7.88e-5), (8, 4.41e-5), (12, 1.96e-5),
        (16, 1.10e-5), (24, 4.91e-6), (32, 2.77e-6)),
    ("pme", "diag7_order3"): (
        (4, 4.79e-5), (6, 1.39e-5), (8, 5.89e-6), (12, 1.76e-6),
        (16, 7.52e-7), (24, 2.29e-7), (32, 9.95e-8)),
    ("fokker_planck", "stage3_order2"): (
        (6, 9.09e-4), (8, 5.04e-4), (12, 2.21e-4), (16, 1.24e-4),
        (24, 5.47e-5), (32, 3.07e-5), (48, 1.36e-5)),
    ("fokker_planck", "diag7_order3"): (
        (8, 4.30e-5), (12, 1.24e-5), (16, 5.21e-6), (24, 1.58e-6),
        (32, 6.72e-7), (48, 2.03e-7), (64, 9.78e-8)),
}

ERROR_GRID_POINTS = 2048


def error_grid():
    """Fixed uniform x-grid on which all densities are compared."""
    return np.linspace(-1.0, 1.0, ERROR_GRID_POINTS)


def _rational(x) -> Fraction:
    """Read a config number as an exact rational; floats are read as the
    decimal they print as, strings may be 'p/q'."""
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    return as_fraction(x)


def mq_for(n: int, n0: int, base: int = 256, cap: int = 2048) -> int:
    """Quantile resolution for a table row: the base doubles every time the
    step count doubles past the coarsest row, up to the cap."""
    if n < n0:
        return base
    return min(cap, base * 2 ** ((n // n0).bit_length() - 1))


def relative_l2_error(u, ref) -> float:
    """Trapezoid-weighted relative L2 distance between two densities
    sampled on the same uniform grid."""
    u = np.asarray(u, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if u.shape != ref.shape:
        raise ValueError("grid mismatch: %s vs %s samples" % (u.shape, ref.shape))
    w = np.ones(len(u))
    w[0] = w[-1] = 0.5
    num = math.sqrt(float(w @ (u - ref) ** 2))
    den = math.sqrt(float(w @ ref ** 2))
    if den == 0.0:
        raise ValueError("reference density is identically zero")
    return num / den


def fit_order(rows) -> float:
    """Least-squares slope of log(error) against log(1/steps) over
    (steps, error) pairs; positive for a convergent method."""
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least 2 rows to fit an order, got %d" % len(rows))
    ns = np.array([r[0] for r in rows], dtype=float)
    errs = np.array([r[1] for r in rows], dtype=float)
    if np.any(errs <= 0.0):
        raise ValueError("order fit needs positive errors")
    return float(np.polyfit(np.log(1.0 / ns), np.log(errs), 1)[0])


def resolve_scheme(name: str):
    """Map a scheme name to coefficients: builtin table name, or a path to
    a scheme file."""
    if name in builtin_scheme_names():
        return builtin_scheme(name)
    if os.path.exists(name):
        return read_scheme_file(name)
    raise ValueError("unknown scheme %r (not a builtin name or a readable file)"
                     % (name,))


@dataclasses.dataclass
class RunConfig:
    """Settings for one study: which problem and scheme, the time horizon,
    the table's step counts, and the resolution/tolerance policy."""
    problem: str
    scheme: str = "stage3_order2"
    final_time: Fraction = None
    step_counts: tuple = None
    mq_base: int = 256
    mq_cap: int = 2048
    proxy_tol: float = 1e-9
    bootstrap: str = "stage3"
    substeps: int = 8
    seed: int = 12345
    dimension: int = 5
    n_steps: int = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError("unknown problem %r; expected one of %s"
                             % (self.problem, ", ".join(PROBLEMS)))
        if self.final_time is None:
            self.final_time = DEFAULT_FINAL_TIME[self.problem]
        else:
            self.final_time = _rational(self.final_time)
        if self.final_time <= 0:
            raise ValueError("final_time must be positive")
        if self.step_counts is None:
            key = (self.problem, self.scheme)
            if key not in DEFAULT_STEP_COUNTS:
                key = (self.problem, "stage3_order2")
            self.step_counts = DEFAULT_STEP_COUNTS[key]
        self.step_counts = tuple(int(n) for n in self.step_counts)
        if any(n <= 0 for n in self.step_counts):
            raise ValueError("step_counts must be positive")
        if any(b >= a for a, b in zip(self.step_counts[1:], self.step_counts)):
            raise ValueError("step_counts must be strictly increasing")
        if self.mq_base < 8 or self.mq_cap < self.mq_base:
            raise ValueError("need 8 <= mq_base <= mq_cap")
        if self.n_steps is None:
            self.n_steps = max(self.step_counts)
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    def scheme_coefficients(self):
        return resolve_scheme(self.scheme)


_CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def load_config(path) -> RunConfig:
    """Read a RunConfig from a JSON file.  Rationals may be written as
    strings like "1/16"; unknown keys are rejected."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ValueError("unknown config keys: %s" % ", ".join(unknown))
    return RunConfig(**raw)


def _pde_space(problem: str) -> Wasserstein1D:
    return Wasserstein1D(PDE_FUNCTIONAL[problem])


def _solve_final(problem, scheme, final_time, n, M_q, bootstrap, substeps, grid):
    """Run n steps to the final time at resolution M_q and return the
    reconstructed density on the comparison grid plus the trajectory."""
    space = _pde_space(problem)
    X0 = initial_quantile(M_q)
    k = float(final_time) / n
    traj = run(scheme, space, X0, k, n, bootstrap=bootstrap, substeps=substeps)
    u = quantile_to_density(traj.points[-1], grid)
    return u, traj


@dataclasses.dataclass
class ProxyResult:
    """A step-halving reference solution at fixed resolution: the density on
    the comparison grid plus the ladder's final step count and gap."""
    problem: str
    M_q: int
    n: int
    k: float
    tol: float
    diff: float
    integrator: str
    density: np.ndarray


_PROXY_CACHE = {}


def proxy_cache_clear():
    _PROXY_CACHE.clear()


def proxy_exact(problem, final_time, tol, M_q, integrator="stage3_order2",
                n_start=None, grid=None, bootstrap="stage3", substeps=8,
                max_steps=1 << 20) -> ProxyResult:
    """Reference density by step halving: rerun with doubled step counts
    until consecutive densities differ by less than tol in relative L2.

    tol=inf returns the first ladder rung.  Raises if the ladder would
    exceed max_steps (the step size would underflow final_time/max_steps)
    without settling.  Results on the default grid are cached in-process.
    """
    if problem not in PDE_PROBLEMS:
        raise ValueError("proxy_exact expects one of %s, got %r"
                         % (", ".join(PDE_PROBLEMS), problem))
    final_time = _rational(final_time)
    if final_time <= 0:
        raise ValueError("final_time must be positive")
    cache_key = None
    if grid is None:
        grid = error_grid()
        cache_key = (problem, str(final_time), float(tol), M_q, integrator,
                     n_start, bootstrap, substeps, max_steps)
        if cache_key in _PROXY_CACHE:
            return _PROXY_CACHE[cache_key]
    scheme = resolve_scheme(integrator)
    if n_start is None:
        n_start = max(scheme.M, int(float(final_time) * 3072))
    n = int(n_start)
    u_prev, _ = _solve_final(problem, scheme, final_time, n, M_q,
                             bootstrap, substeps, grid)
    diff = math.inf
    while diff > tol:
        if 2 * n > max_steps:
            raise RuntimeError(
                "proxy ladder for %s did not settle below %g before the step "
                "count exceeded %d (step size floor %g)"
                % (problem, tol, max_steps, float(final_time) / max_steps))
        n *= 2
        u, _ = _solve_final(problem, scheme, final_time, n, M_q,
                            bootstrap, substeps, grid)
        diff = relative_l2_error(u, u_prev)
        u_prev = u
    result = ProxyResult(problem=problem, M_q=M_q, n=n,
                         k=float(final_time) / n, tol=float(tol), diff=diff,
                         integrator=integrator, density=u_prev)
    if cache_key is not None:
        _PROXY_CACHE[cache_key] = result
    return result


@dataclasses.dataclass
class TableRow:
    n: int
    mq: int
    error: float
    order: float  # pairwise order vs the previous row; nan for the first


@dataclasses.dataclass
class ConvergenceTable:
    problem: str
    scheme: str
    final_time: Fraction
    rows: list
    slope: float
    references: list  # one metadata dict per distinct reference used

    def errors(self):
        return [(r.n, r.error) for r in self.rows]


def _worker_cap() -> int:
    raw = os.environ.get("MFLOW_THREADS", "").strip()
    if raw:
        cap = int(raw)
        if cap < 1:
            raise ValueError("MFLOW_THREADS must be >= 1")
        return cap
    return os.cpu_count() or 1


def _pde_row_job(args):
    (problem, scheme_name, final_time_str, n, M_q, bootstrap, substeps,
     ref_density) = args
    scheme = resolve_scheme(scheme_name)
    final_time = Fraction(final_time_str)
    grid = error_grid()
    u, _ = _solve_final(problem, scheme, final_time, n, M_q,
                        bootstrap, substeps, grid)
    return relative_l2_error(u, ref_density)


def _map_jobs(job_fn, jobs):
    """Run jobs preserving order; uses processes when more than one worker
    is allowed, so results are assembled deterministically either way."""
    workers = min(_worker_cap(), len(jobs))
    if workers <= 1:
        return [job_fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job_fn, jobs))


def _euclidean_setup(config):
    """Deterministic random positive-definite quadratic energy and start
    point for the order study."""
    rng = np.random.default_rng(config.seed)
    d = config.dimension
    B = rng.standard_normal((d, d))
    A = B @ B.T + d * np.eye(d)
    b = rng.standard_normal(d)
    u0 = rng.standard_normal(d)
    return EuclideanQuadratic(A, b), u0


def _pairwise_orders(counts, errs):
    orders = [math.nan]
    for i in range(1, len(errs)):
        orders.append(math.log(errs[i - 1] / errs[i])
                      / math.log(counts[i] / counts[i - 1]))
    return orders


def convergence_table(config: RunConfig) -> ConvergenceTable:
    """Errors at the final time over the configured step counts, against a
    matched-resolution proxy reference (densities) or the exact flow
    (euclidean)."""
    counts = config.step_counts
    scheme = config.scheme_coefficients()
    T = config.final_time

    if config.problem == "euclidean_quadratic":
        space, u0 = _euclidean_setup(config)
        ref = euclidean_exact_flow(space, u0, float(T))
        errs = []
        for n in counts:
            traj = run(scheme, space, u0, float(T) / n, n,
                       bootstrap=config.bootstrap, substeps=config.substeps)
            err = float(np.linalg.norm(traj.points[-1] - ref)
                        / np.linalg.norm(ref))
            errs.append(err)
        mqs = [0] * len(counts)
        refs = [{"kind": "exact_flow", "dimension": config.dimension,
                 "seed": config.seed}]
    else:
        mqs = [mq_for(n, counts[0], config.mq_base, config.mq_cap)
               for n in counts]
        proxies = {}
        for mq in mqs:
            if mq not in proxies:
                proxies[mq] = proxy_exact(
                    config.problem, T, config.proxy_tol, mq,
                    bootstrap=config.bootstrap, substeps=config.substeps)
        jobs = [(config.problem, config.scheme, str(T), n, mq,
                 config.bootstrap, config.substeps, proxies[mq].density)
                for n, mq in zip(counts, mqs)]
        errs = _map_jobs(_pde_row_job, jobs)
        refs = [{"kind": "proxy", "mq": p.M_q, "n": p.n, "k": p.k,
                 "diff": p.diff, "tol": p.tol, "integrator": p.integrator}
                for p in (proxies[mq] for mq in sorted(proxies))]

    orders = _pairwise_orders(counts, errs)
    rows = [TableRow(n=n, mq=mq, error=e, order=o)
            for n, mq, e, o in zip(counts, mqs, errs, orders)]
    slope = fit_order(zip(counts, errs))
    return ConvergenceTable(problem=config.problem, scheme=config.scheme,
                            final_time=T, rows=rows, slope=slope,
                            references=refs)


@dataclasses.dataclass
class TraceRow:
    step: int
    time: float
    energy: float
    d2_prev: float  # squared distance to the previous point; nan at step 0


@dataclasses.dataclass
class EnergyTrace:
    problem: str
    scheme: str
    k: float
    rows: list

    def energies(self):
        return [r.energy for r in self.rows]

    def max_rise(self) -> float:
        """Largest single-step energy increase (negative when strictly
        decreasing throughout)."""
        e = self.energies()
        return max(b - a for a, b in zip(e, e[1:]))

    def max_excess_over_first_step(self) -> float:
        """max over n >= 1 of E(u_n) - E(u_1), the certified-boundedness
        quantity; the starting point u_0 is data, not a produced step."""
        e = self.energies()
        return max(e[1:]) - e[1] if len(e) > 1 else 0.0


def _trace_from_trajectory(space, traj, problem, scheme_name) -> EnergyTrace:
    rows = []
    for i, p in enumerate(traj.points):
        d2 = (space.distance_squared(traj.points[i - 1], p) if i > 0
              else math.nan)
        rows.append(TraceRow(step=i, time=traj.times[i],
                             energy=space.energy(p), d2_prev=d2))
    return EnergyTrace(problem=problem, scheme=scheme_name, k=traj.k,
                       rows=rows)


def energy_trace(config: RunConfig) -> EnergyTrace:
    """Energy and squared step displacement along one run of n_steps steps
    to the final time."""
    scheme = config.scheme_coefficients()
    n = config.n_steps
    k = float(config.final_time) / n
    if config.problem == "euclidean_quadratic":
        space, u0 = _euclidean_setup(config)
    else:
        space = _pde_space(config.problem)
        u0 = initial_quantile(config.mq_base)
    traj = run(scheme, space, u0, k, n,
               bootstrap=config.bootstrap, substeps=config.substeps)
    return _trace_from_trajectory(space, traj, config.problem, config.scheme)


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_table_csv(path, table: ConvergenceTable):
    """Columns n,mq,error,order; the order cell is empty on the first row.
    A trailing slope row carries the fitted slope in the order column."""
    lines = ["n,mq,error,order"]
    for r in table.rows:
        cell = "" if math.isnan(r.order) else _fmt(r.order)
        lines.append("%d,%d,%s,%s" % (r.n, r.mq, _fmt(r.error), cell))
    lines.append("slope,,,%s" % _fmt(table.slope))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trace_csv(path, trace: EnergyTrace):
    """Columns step,time,energy,d2_prev; d2_prev is empty at step 0."""
    lines = ["step,time,energy,d2_prev"]
    for r in trace.rows:
        cell = "" if math.isnan(r.d2_prev) else _fmt(r.d2_prev)
        lines.append("%d,%s,%s,%s" % (r.step, _fmt(r.time), _fmt(r.energy), cell))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trajectory_csv(path, space, traj, problem, scheme_name):
    """Columns step,time,energy,d2_prev,bootstrap for a computed run."""
    trace = _trace_from_trajectory(space, traj, problem, scheme_name)
    lines = ["step,time,energy,d2_prev,bootstrap"]
    for r, flag in zip(trace.rows, traj.bootstrap_flags):
        cell = "" if math.isnan(r.d2_prev) else _fmt(r.d2_prev)
        lines.append("%d,%s,%s,%s,%d" % (r.step, _fmt(r.time), _fmt(r.energy),
                                         cell, int(flag)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
