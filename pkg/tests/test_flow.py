"""Generic stepping engine: stage chaining, bootstrap, failure context."""
import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from mflow.euclidean import EuclideanQuadratic, euclidean_exact_flow
from mflow.flow import (FlowState, StageSolveFailure, Trajectory,
                        bootstrap_first_steps, run, stage_objective, step)
from mflow.schemes import builtin_scheme


class ScalarSpace:
    """1-D metric space with a smooth non-quadratic energy, solved by a
    generic scalar minimizer; exercises the engine without the linear
    solver shortcut."""

    def energy(self, x):
        return float(np.cosh(x))

    def distance_squared(self, p, q):
        return float((p - q) ** 2)

    def stage_solve(self, coeffs, k, warm_start):
        def obj(x):
            pen = sum(g * (x - p) ** 2 for g, p in coeffs)
            return np.cosh(x) + pen / (2 * k)
        res = minimize_scalar(obj, bracket=(warm_start - 1.0, warm_start,
                                            warm_start + 1.0),
                              options={"xtol": 1e-12})
        return float(res.x)


class FailingSpace:
    def energy(self, x):
        return 0.0

    def distance_squared(self, p, q):
        return 0.0

    def stage_solve(self, coeffs, k, warm_start):
        raise RuntimeError("synthetic blow-up")


def quadratic_space(seed=0, d=3):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, d))
    sp = EuclideanQuadratic(B @ B.T + d * np.eye(d), rng.standard_normal(d))
    return sp, rng.standard_normal(d)


def test_run_shapes_and_flags():
    sp, u0 = quadratic_space()
    tr = run(builtin_scheme("stage3_order2"), sp, u0, 1 / 8, 5)
    assert len(tr) == 6
    assert len(tr.points) == len(tr.times) == len(tr.bootstrap_flags) == 6
    assert tr.times == [i / 8 for i in range(6)]
    assert tr.bootstrap_flags == [False] * 6  # single-step scheme: no bootstrap
    assert np.allclose(tr.points[0], u0)

    tr7 = run(builtin_scheme("diag7_order3"), sp, u0, 1 / 8, 5)
    assert len(tr7) == 6
    assert tr7.bootstrap_flags == [False, True, False, False, False, False]


def test_run_rejects_too_few_steps():
    sp, u0 = quadratic_space()
    with pytest.raises(ValueError):
        run(builtin_scheme("stage3_order2"), sp, u0, 0.1, 0)


def test_backward_euler_step_formula():
    """One implicit Euler step solves (A + I/k) x = u/k - b."""
    sp, u0 = quadratic_space(seed=4)
    k = 1 / 16
    state = FlowState(history=[u0], k=k)
    got = step(builtin_scheme("backward_euler"), sp, state)
    expect = np.linalg.solve(sp.A + np.eye(3) / k, u0 / k - sp.b)
    assert np.linalg.norm(got - expect) <= 1e-12
    assert len(state.history) == 2


def test_stage_chain_against_hand_rolled_recursion():
    """Dual route: for zero energy each stage is the weighted mean of its
    anchors; replay the scheme table directly."""
    sp = EuclideanQuadratic(np.zeros((2, 2)), np.zeros(2))
    scheme = builtin_scheme("stage3_order2")
    u0 = np.array([1.0, -2.0])
    state = FlowState(history=[u0], k=0.1)
    got = step(scheme, sp, state)

    v = {0: u0}
    for i in range(1, 4):
        row = scheme.row(i)
        s = float(sum(row.values()))
        v[i] = sum(float(g) * v[j] for j, g in row.items()) / s
    assert np.linalg.norm(got - v[3]) <= 1e-12
    # the full stage list is recorded in order v_0, v_1, v_2, v_3
    assert len(state.stages) == 4
    for i in range(4):
        assert np.allclose(state.stages[i], v[i])


def test_engine_on_scalar_space_matches_implicit_equation():
    """cosh energy: the implicit Euler step solves sinh(x) + (x - u)/k = 0."""
    sp = ScalarSpace()
    k = 0.25
    u0 = 1.3
    state = FlowState(history=[u0], k=k)
    got = step(builtin_scheme("backward_euler"), sp, state)
    x = u0
    for _ in range(60):
        f = np.sinh(x) + (x - u0) / k
        x -= f / (np.cosh(x) + 1 / k)
    assert abs(got - x) <= 1e-8


def test_stage_objective_telescopes_along_stages():
    """Each stage value is at most the previous stage's value of the same
    objective: the chain that yields energy dissipation."""
    sp, u0 = quadratic_space(seed=8)
    scheme = builtin_scheme("stage3_order2")
    k = 0.2
    state = FlowState(history=[u0], k=k)
    step(scheme, sp, state)
    v = {j - scheme.M + 1: p for j, p in enumerate(state.stages)}
    for i in range(1, scheme.N + 1):
        row = scheme.row(i)
        coeffs = [(float(g), v[j]) for j, g in sorted(row.items())]
        at_new = stage_objective(sp, coeffs, k, v[i])
        at_prev = stage_objective(sp, coeffs, k, v[i - 1])
        assert at_new <= at_prev + 1e-12 * (1 + abs(at_prev))


def test_bootstrap_policies():
    sp, u0 = quadratic_space(seed=9)
    k = 1 / 8
    d7 = builtin_scheme("diag7_order3")
    assert bootstrap_first_steps(builtin_scheme("stage3_order2"), sp, u0, k) == []

    boot = bootstrap_first_steps(d7, sp, u0, k, policy="stage3")
    assert len(boot) == 1
    one = run(builtin_scheme("stage3_order2"), sp, u0, k, 1)
    assert np.allclose(boot[0], one.points[-1])

    sub = bootstrap_first_steps(d7, sp, u0, k, policy="substep_euler",
                                substeps=4)
    fine = run(builtin_scheme("backward_euler"), sp, u0, k / 4, 4)
    assert np.allclose(sub[0], fine.points[-1])

    with pytest.raises(ValueError, match="unknown bootstrap policy"):
        bootstrap_first_steps(d7, sp, u0, k, policy="leapfrog")


def test_bootstrap_has_third_order_local_error():
    sp, u0 = quadratic_space(seed=9)
    d7 = builtin_scheme("diag7_order3")
    errs = []
    for p in (5, 6, 7):
        k = 2.0 ** -p
        b = bootstrap_first_steps(d7, sp, u0, k)[0]
        errs.append(np.linalg.norm(b - euclidean_exact_flow(sp, u0, k)))
        assert errs[-1] <= 16.0 * k ** 3
    for a, b in zip(errs, errs[1:]):
        assert 6.0 <= a / b <= 9.0


def test_stage_failure_context():
    with pytest.raises(StageSolveFailure, match="stage 1 of step 0"):
        run(builtin_scheme("stage3_order2"), FailingSpace(), 0.0, 0.1, 2)


def test_trajectory_container():
    tr = Trajectory(points=[0.0, 1.0], times=[0.0, 0.5],
                    bootstrap_flags=[False, False], k=0.5)
    assert len(tr) == 2
