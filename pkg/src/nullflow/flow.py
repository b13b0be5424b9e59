"""Time integration of the leaf-metric flow and coupled heat equations.

The leaf metric evolves by dg'/dt = -2 Ric'(g') (forward) or +2 Ric'
(backward), stepped with classical RK4 and symmetrized after each step.
A scalar density u can be co-evolved by the heat equation
(Delta - d/dt)u = 0 or the conjugate heat equation
(d/dt - Delta + Scal')u = 0, interleaved Strang-style so u sees
time-centered metrics.  Integration stops early with a recorded
singular time when the metric loses positive definiteness (the
shrinking-sphere collapse).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import ScalarField, field_values
from .metric import DIM, LeafMetric, SingularMetricError, laplace_beltrami, ricci
from .metric import curvature as curvature_pack

FORWARD = "forward"
BACKWARD = "backward"
HEAT_NONE = "none"
HEAT_PLAIN = "heat"
HEAT_CONJUGATE = "conjugate-heat"

REACHED_T_END = "reached-t_end"
SINGULAR = "singular"
STEP_UNDERFLOW = "step-underflow"

_CFL_NUMBER = 0.2


class FlowError(ValueError):
    pass


class FlowSingular(RuntimeError):
    """Raised internally when a step would lose positive definiteness."""

    def __init__(self, node, eigenvalue):
        super().__init__(f"metric singular at node {node} (eigenvalue {eigenvalue:.3e})")
        self.node = node
        self.eigenvalue = eigenvalue


@dataclass
class FlowConfig:
    direction: str = FORWARD
    t_end: float = 0.45
    dt_initial: float = 1e-4
    dt_controller: str = "fixed"  # fixed | cfl-adaptive
    eps_singular_rel: float = 1e-6  # threshold relative to the initial min eigenvalue
    heat: str = HEAT_NONE
    heat_t_max: float | None = None  # stop heat stepping early (stiff near collapse)
    sample_every: int = 100

    def __post_init__(self):
        if self.direction not in (FORWARD, BACKWARD):
            raise FlowError(f"unknown direction {self.direction!r}")
        if self.t_end <= 0:
            raise FlowError("t_end must be positive")
        if self.dt_initial <= 0:
            raise FlowError("dt_initial must be positive")
        if self.dt_controller not in ("fixed", "cfl-adaptive"):
            raise FlowError(f"unknown dt controller {self.dt_controller!r}")
        if self.eps_singular_rel <= 0:
            raise FlowError("singularity threshold must be positive")
        if self.heat not in (HEAT_NONE, HEAT_PLAIN, HEAT_CONJUGATE):
            raise FlowError(f"unknown heat coupling {self.heat!r}")
        if self.sample_every < 1:
            raise FlowError("sample_every must be at least 1")


@dataclass
class FlowTrajectory:
    times: np.ndarray
    metrics: list  # LeafMetric per sample
    heat_fields: list | None  # ScalarField values per sample, or None
    termination: str
    singular_time: float | None = None
    heat_valid_until: float | None = None  # u frozen past this time (if set)
    curvatures: list = field(default_factory=list)  # lazily filled CurvaturePacks

    @property
    def grid(self):
        return self.metrics[0].grid

    def curvature(self, k):
        """CurvaturePack for sample k, cached."""
        if not self.curvatures:
            self.curvatures = [None] * len(self.metrics)
        if self.curvatures[k] is None:
            self.curvatures[k] = curvature_pack(self.metrics[k])
        return self.curvatures[k]


def _flow_sign(direction: str) -> float:
    return -2.0 if direction == FORWARD else 2.0


def _rhs(metric: LeafMetric, comps: np.ndarray, sign: float) -> np.ndarray:
    return sign * ricci(LeafMetric(metric.grid, comps))


def step_flow(metric: LeafMetric, direction: str, dt: float) -> LeafMetric:
    """One RK4 step of dg'/dt = -/+ 2 Ric'(g'); output symmetrized."""
    if dt <= 0:
        raise FlowError("dt must be positive")
    metric.require_positive_definite()
    sign = _flow_sign(direction)
    g = metric.comps
    k1 = _rhs(metric, g, sign)
    k2 = _rhs(metric, g + 0.5 * dt * k1, sign)
    k3 = _rhs(metric, g + 0.5 * dt * k2, sign)
    k4 = _rhs(metric, g + dt * k3, sign)
    out = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return LeafMetric(metric.grid, out)


def _check_singular(metric: LeafMetric, threshold: float):
    lam = metric.min_eigenvalue()
    if np.min(lam) < threshold:
        node = int(np.argmin(lam))
        raise FlowSingular(node, float(lam.flat[node]))


def _heat_rhs(metric: LeafMetric, u: np.ndarray, mode: str, scal: np.ndarray) -> np.ndarray:
    lap = laplace_beltrami(metric, u)
    if mode == HEAT_CONJUGATE:
        return lap - scal * u
    return lap


def _diffusion_rate(metric: LeafMetric) -> float:
    """Explicit-stability rate sum of g^aa / h_a^2 over active axes.

    On 1-D reduced grids derivatives along the symmetry axis vanish, so
    only axis 0 contributes.
    """
    grid = metric.grid
    ginv = metric.inverse()
    return sum(
        float(np.max(ginv[..., a, a])) / grid.spacings[a] ** 2
        for a in range(grid.ndim_grid)
    )


def _heat_substep(metric: LeafMetric, u: np.ndarray, dt: float, mode: str) -> np.ndarray:
    """Advance u by dt on a frozen metric with RK4, CFL-limited substeps."""
    scal = curvature_pack(metric).scal if mode == HEAT_CONJUGATE else 0.0
    rate = _diffusion_rate(metric)
    if mode == HEAT_CONJUGATE:
        rate += float(np.max(np.abs(scal)))
    dt_cfl = _CFL_NUMBER / rate
    nsub = max(1, int(np.ceil(dt / dt_cfl)))
    h = dt / nsub
    for _ in range(nsub):
        k1 = _heat_rhs(metric, u, mode, scal)
        k2 = _heat_rhs(metric, u + 0.5 * h * k1, mode, scal)
        k3 = _heat_rhs(metric, u + 0.5 * h * k2, mode, scal)
        k4 = _heat_rhs(metric, u + h * k3, mode, scal)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if np.any(u <= 0.0):
        node = int(np.argmin(u))
        raise FlowError(f"heat solution lost positivity at node {node} (u = {u.flat[node]:.3e})")
    return u


def run_flow(initial: LeafMetric, config: FlowConfig, u0: ScalarField | None = None) -> FlowTrajectory:
    """Integrate the flow (optionally co-evolving u) and sample the state.

    Samples are stored every ``sample_every`` steps plus the final state.
    Termination reasons: reached-t_end, singular (with the singular time),
    or step-underflow for a collapsed adaptive step.

    Backward runs (dg'/dt = +2 Ric') are realized as the time reversal of
    a forward integration: stepping the backward equation explicitly is
    exponentially ill-posed (a backward heat equation), while the reversed
    forward trajectory satisfies it exactly.  The coupled conjugate heat
    equation is then solved forward in t along the stored samples, which
    is its well-posed direction.
    """
    if config.direction == BACKWARD:
        return _run_backward(initial, config, u0)
    initial.require_positive_definite()
    if config.heat != HEAT_NONE:
        if u0 is None:
            raise FlowError("heat coupling requires initial data u0")
        u = field_values(u0, initial.grid).copy()
        if np.any(u <= 0.0):
            raise FlowError("heat initial data must be positive everywhere")
    else:
        u = None

    threshold = config.eps_singular_rel * float(np.min(initial.min_eigenvalue()))
    heat_t_max = config.heat_t_max if config.heat_t_max is not None else config.t_end

    times = [0.0]
    metrics = [initial.copy()]
    heats = [u.copy()] if u is not None else None

    t = 0.0
    dt = config.dt_initial
    metric = initial.copy()
    termination = REACHED_T_END
    singular_time = None
    step = 0
    while t < config.t_end - 1e-15:
        dt_step = min(dt, config.t_end - t)
        if config.dt_controller == "cfl-adaptive":
            # the linearized flow diffuses with coefficient g^aa along each
            # active axis, so the explicit limit matches the heat stencil's
            rate = _diffusion_rate(metric)
            if rate > 0:
                dt_step = min(dt_step, _CFL_NUMBER / rate)
            if dt_step < 1e-12 * config.t_end:
                termination = STEP_UNDERFLOW
                break
        heat_active = u is not None and t < heat_t_max
        try:
            if heat_active:
                h_dt = min(dt_step, heat_t_max - t)
                u = _heat_substep(metric, u, 0.5 * h_dt, config.heat)
            new_metric = step_flow(metric, config.direction, dt_step)
            _check_singular(new_metric, threshold)
            if heat_active:
                u = _heat_substep(new_metric, u, 0.5 * h_dt, config.heat)
        except (FlowSingular, SingularMetricError):
            termination = SINGULAR
            # collapse happened inside this step
            singular_time = t + dt_step
            break
        metric = new_metric
        t += dt_step
        step += 1
        if step % config.sample_every == 0:
            times.append(t)
            metrics.append(metric.copy())
            if heats is not None:
                heats.append(u.copy())

    if termination == REACHED_T_END and not np.isclose(times[-1], t):
        times.append(t)
        metrics.append(metric.copy())
        if heats is not None:
            heats.append(u.copy())

    heat_fields = None
    valid_until = None
    if heats is not None:
        heat_fields = [ScalarField(initial.grid, v) for v in heats]
        if heat_t_max < config.t_end:
            valid_until = heat_t_max
    return FlowTrajectory(
        np.asarray(times), metrics, heat_fields, termination, singular_time,
        heat_valid_until=valid_until,
    )


def _run_backward(initial: LeafMetric, config: FlowConfig, u0: ScalarField | None) -> FlowTrajectory:
    fwd_cfg = FlowConfig(
        direction=FORWARD,
        t_end=config.t_end,
        dt_initial=config.dt_initial,
        dt_controller=config.dt_controller,
        eps_singular_rel=config.eps_singular_rel,
        heat=HEAT_NONE,
        sample_every=config.sample_every,
    )
    fwd = run_flow(initial, fwd_cfg)
    if fwd.termination != REACHED_T_END:
        raise FlowError(
            "backward run unreachable: the auxiliary forward integration "
            f"terminated {fwd.termination} before t_end"
        )
    times = config.t_end - fwd.times[::-1]
    metrics = [m.copy() for m in reversed(fwd.metrics)]
    traj = FlowTrajectory(times, metrics, None, REACHED_T_END)
    if config.heat != HEAT_NONE:
        if u0 is None:
            raise FlowError("heat coupling requires initial data u0")
        traj.heat_fields = _solve_on_trajectory(traj, u0, config.heat)
    return traj


def solve_heat(trajectory: FlowTrajectory, u0: ScalarField) -> list:
    """Heat flow (Delta - d/dt)u = 0 along the stored metric samples.

    Steps between consecutive stored metrics with Strang halves, so u is
    reported exactly at the trajectory sample times.
    """
    return _solve_on_trajectory(trajectory, u0, HEAT_PLAIN)


def solve_conjugate_heat(trajectory: FlowTrajectory, u0: ScalarField) -> list:
    """Conjugate heat flow (d/dt - Delta + Scal')u = 0 along the samples."""
    return _solve_on_trajectory(trajectory, u0, HEAT_CONJUGATE)


def _solve_on_trajectory(trajectory: FlowTrajectory, u0: ScalarField, mode: str) -> list:
    u = field_values(u0, trajectory.grid).copy()
    if np.any(u <= 0.0):
        raise FlowError("heat initial data must be positive everywhere")
    out = [ScalarField(trajectory.grid, u.copy())]
    for k in range(1, len(trajectory.times)):
        dt = trajectory.times[k] - trajectory.times[k - 1]
        u = _heat_substep(trajectory.metrics[k - 1], u, 0.5 * dt, mode)
        u = _heat_substep(trajectory.metrics[k], u, 0.5 * dt, mode)
        out.append(ScalarField(trajectory.grid, u.copy()))
    return out


@dataclass
class CurvatureBounds:
    """Curvature scales (rho1, rho2, rho3) entering the estimate hypotheses:
    Scal' >= -rho1, Ric' >= -rho2 g', and |grad Scal'| <= rho3."""

    rho1: float = 0.0
    rho2: float = 0.0
    rho3: float = 0.0

    def __post_init__(self):
        if self.rho1 < 0 or self.rho2 < 0 or self.rho3 < 0:
            raise FlowError("curvature bounds must be nonnegative")


def measure_curvature_bounds(trajectory: FlowTrajectory, slack: float = 1e-9) -> CurvatureBounds:
    """Smallest (rho1, rho2, rho3) satisfied by every stored sample."""
    from .metric import grad_norm_sq

    rho1 = rho2 = rho3 = 0.0
    for k, metric in enumerate(trajectory.metrics):
        pack = trajectory.curvature(k)
        rho1 = max(rho1, float(-np.min(pack.scal)))
        s = _sqrt_inv(metric)
        ric_eigs = np.linalg.eigvalsh(
            np.einsum("...ab,...bc,...cd->...ad", s, pack.ricci, s)
        )
        rho2 = max(rho2, float(-np.min(ric_eigs)))
        grad2 = grad_norm_sq(metric, pack.scal)
        rho3 = max(rho3, float(np.sqrt(np.max(grad2))))
    bump = 1.0 + slack
    return CurvatureBounds(rho1 * bump, rho2 * bump, rho3 * bump)


def _sqrt_inv(metric: LeafMetric) -> np.ndarray:
    """Inverse principal square root of g' per node (for g'-relative eigenvalues)."""
    w, v = np.linalg.eigh(metric.comps)
    return np.einsum("...ab,...b,...cb->...ac", v, 1.0 / np.sqrt(w), v)


@dataclass
class EquivalenceReport:
    hypothesis_ok: bool
    failed_hypothesis: str | None
    worst_lower: float  # min over (x, t) of eigratio / lower bound
    worst_upper: float  # max over (x, t) of eigratio / upper bound
    holds: bool


def metric_equivalence_check(
    trajectory: FlowTrajectory,
    bounds: CurvatureBounds,
    direction: str = FORWARD,
    tol: float = 1e-9,
) -> EquivalenceReport:
    """Two-sided uniform-equivalence check of g'(t) against g'(0).

    First verifies -rho1 g' <= Ric' <= rho2 g' pointwise on every sample
    (the hypothesis); on failure the conclusion is not judged.  The
    conclusion checked is the flow-ODE bound on generalized eigenvalues of
    g'(t) relative to g'(0):

        exp(-2 rho2 t) <= eig <= exp(+2 rho1 t)      (forward flow)

    with the exponents swapped for backward trajectories (the metric then
    grows where Ricci is positive).
    """
    if len(trajectory.metrics) < 2:
        raise FlowError("equivalence check needs at least two stored samples")
    for k, metric in enumerate(trajectory.metrics):
        pack = trajectory.curvature(k)
        s = _sqrt_inv(metric)
        ric_rel = np.einsum("...ab,...bc,...cd->...ad", s, pack.ricci, s)
        eigs = np.linalg.eigvalsh(ric_rel)
        if np.min(eigs) < -bounds.rho1 - tol:
            return EquivalenceReport(False, "ricci-lower-bound", np.nan, np.nan, False)
        if np.max(eigs) > bounds.rho2 + tol:
            return EquivalenceReport(False, "ricci-upper-bound", np.nan, np.nan, False)
    if direction == FORWARD:
        rho1, rho2 = bounds.rho1, bounds.rho2
    else:
        rho1, rho2 = bounds.rho2, bounds.rho1

    s0 = _sqrt_inv(trajectory.metrics[0])
    worst_lower = np.inf
    worst_upper = -np.inf
    holds = True
    for k, metric in enumerate(trajectory.metrics):
        t = trajectory.times[k]
        rel = np.einsum("...ab,...bc,...cd->...ad", s0, metric.comps, s0)
        eigs = np.linalg.eigvalsh(rel)
        lo = np.exp(-2.0 * rho2 * t)
        hi = np.exp(2.0 * rho1 * t)
        worst_lower = min(worst_lower, float(np.min(eigs) / lo))
        worst_upper = max(worst_upper, float(np.max(eigs) / hi))
        if np.min(eigs) < lo * (1.0 - tol) - tol or np.max(eigs) > hi * (1.0 + tol) + tol:
            holds = False
    return EquivalenceReport(True, None, worst_lower, worst_upper, holds)
