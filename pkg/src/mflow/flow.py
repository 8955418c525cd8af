"""Generic variational time stepping over any metric-energy space.

A space provides energy(p), distance_squared(p, q) and stage_solve(...);
``step`` runs the stage loop of a scheme, ``run`` produces a trajectory with
bootstrap handling for multi-step schemes.
"""
from dataclasses import dataclass, field


class StageSolveFailure(RuntimeError):
    """A stage minimization failed; carries the stage index and step number."""

    def __init__(self, stage: int, step_index: int, cause: Exception):
        super().__init__(f"stage {stage} of step {step_index} failed: {cause}")
        self.stage = stage
        self.step_index = step_index
        self.cause = cause


@dataclass
class FlowState:
    """Mutable stepping state: the accepted points so far, the step size, and
    the stage scratch list v_{-M+1}..v_N from the most recent step."""
    history: list
    k: float
    stages: list = field(default_factory=list)


@dataclass
class Trajectory:
    """Accepted points u_0..u_n with times j*k; bootstrap_flags marks points
    produced by the bootstrap policy rather than the scheme itself."""
    points: list
    times: list
    bootstrap_flags: list
    k: float

    def __len__(self):
        return len(self.points)


def stage_objective(space, coeffs, k: float, point) -> float:
    """E(point) + (1/2k) sum_j g_j d^2(point, anchor_j)."""
    total = space.energy(point)
    for g, anchor in coeffs:
        total += float(g) * space.distance_squared(point, anchor) / (2.0 * k)
    return total


def step(scheme, space, state: FlowState):
    """Advance one step: bind v_{-M+1}..v_0 to the last M history points,
    solve the N stage problems in order (each warm-started at the previous
    stage), append v_N to the history and return it."""
    M, N = scheme.M, scheme.N
    if len(state.history) < M:
        raise ValueError(
            f"need at least {M} history points before stepping, have {len(state.history)}")
    k = state.k
    v = {}
    n_hist = len(state.history)
    for j in range(-M + 1, 1):
        v[j] = state.history[n_hist - 1 + j]
    for i in range(1, N + 1):
        row = scheme.row(i)
        coeffs = [(float(row[j]), v[j]) for j in sorted(row)]
        try:
            v[i] = space.stage_solve(coeffs, k, v[i - 1])
        except Exception as exc:
            raise StageSolveFailure(i, n_hist - 1, exc) from exc
    state.stages = [v[j] for j in range(-M + 1, N + 1)]
    state.history.append(v[N])
    return v[N]


def bootstrap_first_steps(scheme, space, u0, k: float, policy: str = "stage3",
                          substeps: int = 8):
    """Generate the M-1 early points a multi-step scheme needs.

    policy "substep_euler": each early point comes from ``substeps`` backward
    Euler steps of size k/substeps.  policy "stage3": one step of the
    single-step 3-stage scheme at size k.  Returns [] when M = 1.
    """
    from .schemes import builtin_scheme

    M = scheme.M
    out = []
    if M < 2:
        return out
    prev = u0
    for _ in range(M - 1):
        if policy == "stage3":
            aux = FlowState(history=[prev], k=k)
            nxt = step(builtin_scheme("stage3_order2"), space, aux)
        elif policy == "substep_euler":
            if substeps < 1:
                raise ValueError(f"substeps must be >= 1, got {substeps}")
            aux = FlowState(history=[prev], k=k / substeps)
            be = builtin_scheme("backward_euler")
            for _ in range(substeps):
                nxt = step(be, space, aux)
        else:
            raise ValueError(f"unknown bootstrap policy {policy!r}")
        out.append(nxt)
        prev = nxt
    return out


def run(scheme, space, u0, k: float, n_steps: int, bootstrap: str = "stage3",
        substeps: int = 8) -> Trajectory:
    """Integrate n_steps steps of size k from u0; returns the n_steps+1
    points u_0..u_{n_steps}, the first M-1 of the generated ones flagged as
    bootstrap output."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    M = scheme.M
    if n_steps < M - 1:
        raise ValueError(
            f"n_steps={n_steps} cannot cover the {M - 1} bootstrap steps of an M={M} scheme")
    boot = bootstrap_first_steps(scheme, space, u0, k, policy=bootstrap, substeps=substeps)
    points = [u0] + list(boot)
    flags = [False] + [True] * len(boot)
    state = FlowState(history=list(points), k=k)
    for _ in range(n_steps - len(boot)):
        points.append(step(scheme, space, state))
        flags.append(False)
    times = [i * k for i in range(len(points))]
    return Trajectory(points=points, times=times, bootstrap_flags=flags, k=k)
