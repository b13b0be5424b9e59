"""Gradient-estimate evaluation on flow trajectories.

Every supported inequality bounds a gradient quantity of a positive
solution u of the (conjugate) heat equation coupled to the leaf flow:

* ``log-gradient-backward``: |grad u|^2/u^2 <= (1 + ln(A/u))^2 *
  (1/t + c2 rho1 + 4 rho2 + 2 rho3 + (rho c1 sqrt(rho2) + c2)/rho^2),
  local on a geodesic cube, u solving the conjugate heat equation along
  the backward flow.  A proof-end variant replaces 2 rho3 by
  rho3 + sqrt(rho3) and is recorded alongside.
* ``log-gradient-forward``: same shape without the Ricci term:
  (1 + ln(A/u))^2 (1/t + c2 rho1 + 2 rho3 + c2/rho^2).
* ``harnack-local``: the Harnack quantity |grad f|^2 - alpha f_t with
  f = ln u is bounded over the cube by alpha n p/(4t)
  + c alpha^2 (alpha^2 p/(rho^2 (alpha-1)) + 1/t + rho1 + rho2)
  + alpha^2 n p rho1 / (2(alpha-1)) + (alpha n/2)(rho1+rho2) sqrt(pq).
* ``harnack-global``: global bound alpha n p/(4t)
  + alpha^2 n p rho1/(2(alpha-1)) + (alpha n/2)(rho1+rho2) sqrt(pq);
  with nonnegative Ricci a single rho gives alpha n p/(4t)
  + (alpha n/2) rho sqrt(pq), valid for all alpha >= 1.
* ``li-yau``: alpha = 1, p = q = 2 case, bound n/(2t) + n rho under
  0 <= Ric' <= rho g'.

The absolute constants are made operational from a shipped cutoff
certificate: c1, c2 certified by dense sampling, c3 = max(c1, c2),
c4 = n c3, c(n) = n c4.  Reports carry the constants used, measured
curvature bounds, and a status from {holds, violated,
hypothesis-violated}; a failed hypothesis always suppresses judgement
of the conclusion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distance import geodesic_distance
from .flow import CurvatureBounds, FlowTrajectory
from .grids import ScalarField, field_values
from .metric import DIM, grad_norm_sq

THEOREM_IDS = (
    "log-gradient-backward",
    "log-gradient-forward",
    "harnack-local",
    "harnack-global",
    "li-yau",
)

HOLDS = "holds"
VIOLATED = "violated"
HYPOTHESIS_VIOLATED = "hypothesis-violated"

A_SLACK = 1e-9  # default A = (1 + A_SLACK) * sup u
HYPOTHESIS_TOL = 1e-3  # curvature hypotheses checked to stencil noise


class EstimateError(ValueError):
    pass


# --- cutoff profile -------------------------------------------------------


def _smoothstep(s):
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def cutoff_profile(s):
    """C^2 profile: 1 on [0,1], quintic smoothstep down to 0 at 2."""
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    mid = (s > 1.0) & (s < 2.0)
    out[mid] = _smoothstep(2.0 - s[mid])
    out[s >= 2.0] = 0.0
    return out


def _cutoff_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    mid = (s > 1.0) & (s < 2.0)
    w = 2.0 - s[mid]
    out[mid] = -30.0 * w * w * (1.0 - w) ** 2
    return out


def _cutoff_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    mid = (s > 1.0) & (s < 2.0)
    w = 2.0 - s[mid]
    out[mid] = 60.0 * w * (1.0 - w) * (1.0 - 2.0 * w)
    return out


@dataclass
class CutoffCertificate:
    c1: float  # psi'' >= -c1
    c2: float  # (psi')^2 / psi <= c2 where psi > 0
    samples: int

    def profile(self, s):
        return cutoff_profile(s)


def build_cutoff(samples: int = 1_000_000, safety: float = 1.05) -> CutoffCertificate:
    """Certify the shipped cutoff constants over a dense sample grid."""
    s = np.linspace(0.0, 2.0, samples)
    psi = cutoff_profile(s)
    d2 = _cutoff_d2(s)
    c1 = max(float(np.max(-d2)), 0.0) * safety
    pos = psi > 0.0
    ratio = _cutoff_d1(s[pos]) ** 2 / psi[pos]
    c2 = float(np.max(ratio)) * safety
    return CutoffCertificate(c1, c2, samples)


def operational_constants(cert: CutoffCertificate, n: int = DIM) -> dict:
    c3 = max(cert.c1, cert.c2)
    return {
        "c1": cert.c1,
        "c2": cert.c2,
        "c3": c3,
        "c4": n * c3,
        "c_n": n * n * c3,
    }


# --- parameters -----------------------------------------------------------


@dataclass
class EstimateParams:
    """Parameters shared by the inequality evaluators.

    alpha, p, q obey 1/p + 1/q = 1/alpha; rho is the geodesic-cube
    radius (admissible nodes satisfy d(x, center) <= 2 rho); A is the
    upper bound for u (computed from the data when omitted).
    """

    alpha: float = 1.0
    p: float = 2.0
    q: float = 2.0
    rho: float = 1.0
    center: tuple | int = 0
    A: float | None = None
    ricci_upper: float | None = None  # explicit rho for li-yau / nonneg-Ricci branch

    def __post_init__(self):
        if self.alpha < 1.0:
            raise EstimateError("alpha must be at least 1")
        if self.p <= 0 or self.q <= 0:
            raise EstimateError("p and q must be positive")
        if abs(1.0 / self.p + 1.0 / self.q - 1.0 / self.alpha) > 1e-12:
            raise EstimateError(
                f"constraint 1/p + 1/q = 1/alpha violated: "
                f"1/{self.p} + 1/{self.q} != 1/{self.alpha}"
            )
        if self.rho <= 0:
            raise EstimateError("cube radius rho must be positive")


# --- pointwise quantities -------------------------------------------------


def log_density(u, A: float) -> np.ndarray:
    """f = ln(u/A); requires 0 < u <= A so that f <= 0 and 1 - f >= 1."""
    u = np.asarray(field_values(u), dtype=float)
    if np.any(u <= 0.0):
        raise EstimateError("u must be positive everywhere")
    if np.any(u > A):
        node = int(np.argmax(u))
        raise EstimateError(f"u exceeds A at node {node} (u = {u.flat[node]:.6g} > {A:.6g})")
    return np.log(u / A)


def phi_quantity(metric, f) -> np.ndarray:
    """phi = |grad f|^2 / (1 - f)^2 for f <= 0."""
    f = np.asarray(field_values(f), dtype=float)
    if np.any(f > 1e-12):
        raise EstimateError("phi is defined for f <= 0")
    return grad_norm_sq(metric, f) / (1.0 - f) ** 2


def time_derivative(times: np.ndarray, series: np.ndarray) -> np.ndarray:
    """d/dt of node samples along the trajectory time axis (axis 0).

    Centered on interior samples, one-sided second order at the ends,
    matching the solver's order of accuracy.
    """
    times = np.asarray(times, dtype=float)
    return np.gradient(series, times, axis=0, edge_order=2)


def harnack_quantity(metric, u, u_t, alpha: float, t: float) -> np.ndarray:
    """G = t (|grad f|^2 - alpha f_t) with f = ln u.

    Discretized so the chain rule is exact: |grad f|^2 := |grad u|^2/u^2
    and f_t := u_t/u, making G/t = |grad u|^2/u^2 - alpha u_t/u an
    algebraic identity.
    """
    u = np.asarray(field_values(u), dtype=float)
    if np.any(u <= 0.0):
        raise EstimateError("u must be positive everywhere")
    grad2 = grad_norm_sq(metric, u) / u**2
    ft = np.asarray(u_t, dtype=float) / u
    return t * (grad2 - alpha * ft)


# --- right-hand sides -----------------------------------------------------


def bound_backward_thm(t, bounds: CurvatureBounds, rho, cert: CutoffCertificate, A, u):
    """Per-node RHS of the backward (conjugate-heat) log-gradient bound."""
    u = np.asarray(field_values(u), dtype=float)
    pref = (1.0 + np.log(A / u)) ** 2
    factor = (
        1.0 / t
        + cert.c2 * bounds.rho1
        + 4.0 * bounds.rho2
        + 2.0 * bounds.rho3
        + (rho * cert.c1 * np.sqrt(bounds.rho2) + cert.c2) / rho**2
    )
    return pref * factor


def bound_backward_thm_proof_variant(t, bounds: CurvatureBounds, rho, cert, A, u):
    """Variant with rho3 + sqrt(rho3) in place of 2 rho3 (recorded only)."""
    u = np.asarray(field_values(u), dtype=float)
    pref = (1.0 + np.log(A / u)) ** 2
    factor = (
        1.0 / t
        + cert.c2 * bounds.rho1
        + 4.0 * bounds.rho2
        + bounds.rho3
        + np.sqrt(bounds.rho3)
        + (rho * cert.c1 * np.sqrt(bounds.rho2) + cert.c2) / rho**2
    )
    return pref * factor


def bound_forward_thm(t, rho1, rho3, rho, cert: CutoffCertificate, A, u):
    """Per-node RHS of the forward (heat) log-gradient bound."""
    u = np.asarray(field_values(u), dtype=float)
    pref = (1.0 + np.log(A / u)) ** 2
    factor = 1.0 / t + cert.c2 * rho1 + 2.0 * rho3 + cert.c2 / rho**2
    return pref * factor


def bound_local_forward(t, bounds: CurvatureBounds, rho, alpha, p, q, c, n: int = DIM):
    """Scalar local Harnack bound over the geodesic cube."""
    if alpha <= 1.0:
        raise EstimateError("local Harnack bound requires alpha > 1")
    r12 = bounds.rho1 + bounds.rho2
    return (
        alpha * n * p / (4.0 * t)
        + c * alpha**2 * (alpha**2 * p / (rho**2 * (alpha - 1.0)) + 1.0 / t + r12)
        + alpha**2 * n * p * bounds.rho1 / (2.0 * (alpha - 1.0))
        + 0.5 * alpha * n * r12 * np.sqrt(p * q)
    )


def bound_global_forward(t, rho1, rho2, alpha, p, q, n: int = DIM):
    """Scalar global Harnack bound; rho2 = None selects the
    nonnegative-Ricci branch with a single scale rho = rho1."""
    if rho2 is None:
        rho = rho1
        return alpha * n * p / (4.0 * t) + 0.5 * alpha * n * rho * np.sqrt(p * q)
    if alpha <= 1.0:
        raise EstimateError("global Harnack bound requires alpha > 1 (use the nonnegative-Ricci branch for alpha = 1)")
    return (
        alpha * n * p / (4.0 * t)
        + alpha**2 * n * p * rho1 / (2.0 * (alpha - 1.0))
        + 0.5 * alpha * n * (rho1 + rho2) * np.sqrt(p * q)
    )


def bound_alpha_one(t, rho, n: int = DIM):
    """Li-Yau bound n/(2t) + n rho under 0 <= Ric' <= rho g'."""
    return n / (2.0 * t) + n * rho


# --- verification sweep ---------------------------------------------------


@dataclass
class EstimateReport:
    theorem: str
    status: str
    constants: dict
    measured_bounds: dict
    max_violation: float  # max over admissible points of LHS - RHS (<= 0 when holds)
    min_margin: float  # min of RHS - LHS
    margin_quantiles: dict
    violations: list  # (time index, node index, lhs, rhs) worst first
    failed_hypothesis: str | None = None
    admissible_points: int = 0
    extra: dict = field(default_factory=dict)

    def holds(self) -> bool:
        return self.status == HOLDS


def _ricci_relative_eigs(metric, ricci):
    w, v = np.linalg.eigh(metric.comps)
    s = np.einsum("...ab,...b,...cb->...ac", v, 1.0 / np.sqrt(w), v)
    rel = np.einsum("...ab,...bc,...cd->...ad", s, ricci, s)
    return np.linalg.eigvalsh(rel)


def _measure_bounds(trajectory: FlowTrajectory, masks) -> dict:
    """Measured curvature scales over the admissible region."""
    rho1 = rho2_low = rho2_high = rho3 = -np.inf
    for k, metric in enumerate(trajectory.metrics):
        mask = masks[k]
        if not np.any(mask):
            continue
        pack = trajectory.curvature(k)
        eigs = _ricci_relative_eigs(metric, pack.ricci)
        rho1 = max(rho1, float(np.max(-pack.scal[mask])))
        rho2_low = max(rho2_low, float(np.max(-np.min(eigs, axis=-1)[mask])))
        rho2_high = max(rho2_high, float(np.max(np.max(eigs, axis=-1)[mask])))
        grad_scal = np.sqrt(grad_norm_sq(metric, pack.scal))
        rho3 = max(rho3, float(np.max(grad_scal[mask])))
    return {
        "neg_scal_sup": rho1,
        "neg_ricci_eig_sup": rho2_low,
        "ricci_eig_sup": rho2_high,
        "grad_scal_sup": rho3,
    }


def _admissible_masks(trajectory: FlowTrajectory, params: EstimateParams):
    """Per-sample node masks for the geodesic cube d <= 2 rho."""
    masks = []
    for metric in trajectory.metrics:
        dist = geodesic_distance(metric, params.center)
        masks.append(dist.valid & (dist.values <= 2.0 * params.rho))
    return masks


def verify(
    trajectory: FlowTrajectory,
    theorem: str,
    params: EstimateParams,
    bounds: CurvatureBounds | None = None,
    cert: CutoffCertificate | None = None,
    t_min: float = 0.0,
) -> EstimateReport:
    """Sweep one inequality over every admissible (node, time) pair.

    ``bounds`` supplies the hypothesis curvature scales; when omitted
    they are taken as the measured suprema over the admissible region
    (with slack), making the check property-based.  Hypothesis failures
    produce status ``hypothesis-violated`` and no conclusion judgement.
    """
    if theorem not in THEOREM_IDS:
        raise EstimateError(f"unknown theorem id {theorem!r}; choose from {THEOREM_IDS}")
    if trajectory.heat_fields is None:
        raise EstimateError("trajectory carries no heat field to verify")
    if cert is None:
        cert = build_cutoff(samples=100_001)

    times = trajectory.times
    # samples past the heat horizon carry a frozen u with no meaningful
    # time derivative; exclude them from the sweep and the measurement
    horizon = trajectory.heat_valid_until
    t_hi = np.inf if horizon is None else horizon + 1e-12
    sel = [k for k, t in enumerate(times) if t <= t_hi]
    u_series = np.full((len(times),) + trajectory.grid.shape, np.nan)
    u_sel = np.stack([trajectory.heat_fields[k].values for k in sel], axis=0)
    u_series[sel] = u_sel
    u_t_series = np.full_like(u_series, np.nan)
    u_t_series[sel] = time_derivative(times[sel], u_sel)

    masks = _admissible_masks(trajectory, params)
    empty = np.zeros(trajectory.grid.shape, dtype=bool)
    masks = [m if k in set(sel) else empty for k, m in enumerate(masks)]
    measured = _measure_bounds(trajectory, masks)
    constants = operational_constants(cert)

    sup_u = float(np.max(u_series))
    A = params.A if params.A is not None else (1.0 + A_SLACK) * sup_u

    bump = 1.0 + 1e-9
    if bounds is None:
        bounds = CurvatureBounds(
            max(measured["neg_scal_sup"], 0.0) * bump,
            max(measured["neg_ricci_eig_sup"], 0.0) * bump,
            max(measured["grad_scal_sup"], 0.0) * bump,
        )
    # the report must carry every constant entering the RHS
    constants.update(A=A, rho1=bounds.rho1, rho2=bounds.rho2, rho3=bounds.rho3)

    failed = _check_hypotheses(theorem, params, bounds, measured, sup_u, A)
    if failed is not None:
        return EstimateReport(
            theorem, HYPOTHESIS_VIOLATED, constants, measured,
            np.nan, np.nan, {}, [], failed_hypothesis=failed,
        )

    admissible = 0
    worst = []
    margins = []
    extra = {"margin_by_time": []}
    if theorem == "log-gradient-backward":
        extra["rhs_proof_variant_min"] = np.inf
    for k, t in enumerate(times):
        if t <= t_min or t <= 0.0:
            continue
        mask = masks[k]
        if not np.any(mask):
            continue
        metric = trajectory.metrics[k]
        u = u_series[k]
        u_t = u_t_series[k]
        if theorem in ("log-gradient-backward", "log-gradient-forward"):
            lhs = grad_norm_sq(metric, u) / u**2
            if theorem == "log-gradient-backward":
                rhs = bound_backward_thm(t, bounds, params.rho, cert, A, u)
                variant = bound_backward_thm_proof_variant(t, bounds, params.rho, cert, A, u)
                extra["rhs_proof_variant_min"] = min(
                    extra["rhs_proof_variant_min"], float(np.min(variant[mask]))
                )
            else:
                rhs = bound_forward_thm(t, bounds.rho1, bounds.rho3, params.rho, cert, A, u)
        else:
            G = harnack_quantity(metric, u, u_t, params.alpha, t)
            lhs = G / t
            if theorem == "harnack-local":
                rhs_val = bound_local_forward(
                    t, bounds, params.rho, params.alpha, params.p, params.q,
                    constants["c3"],
                )
            elif theorem == "harnack-global":
                if params.alpha > 1.0:
                    rhs_val = bound_global_forward(
                        t, bounds.rho1, bounds.rho2, params.alpha, params.p, params.q
                    )
                else:
                    rho_up = params.ricci_upper
                    if rho_up is None:
                        rho_up = measured["ricci_eig_sup"] * bump
                    rhs_val = bound_global_forward(
                        t, rho_up, None, params.alpha, params.p, params.q
                    )
            else:  # li-yau
                rho_up = params.ricci_upper
                if rho_up is None:
                    rho_up = measured["ricci_eig_sup"] * bump
                rhs_val = bound_alpha_one(t, rho_up)
            rhs = np.full_like(lhs, rhs_val)
        m = (rhs - lhs)[mask]
        admissible += int(np.count_nonzero(mask))
        margins.append(m)
        extra["margin_by_time"].append((float(t), float(np.min(m))))
        flat_idx = np.flatnonzero(mask.ravel())
        lhs_flat = lhs.ravel()[flat_idx]
        rhs_flat = np.broadcast_to(rhs, lhs.shape).ravel()[flat_idx]
        bad = lhs_flat > rhs_flat
        for j in np.nonzero(bad)[0]:
            worst.append((k, int(flat_idx[j]), float(lhs_flat[j]), float(rhs_flat[j])))

    if admissible == 0:
        raise EstimateError("admissible set is empty (cube entirely masked)")
    margins = np.concatenate(margins)
    worst.sort(key=lambda rec: rec[3] - rec[2])
    quant = {
        "q00": float(np.min(margins)),
        "q25": float(np.quantile(margins, 0.25)),
        "q50": float(np.quantile(margins, 0.50)),
        "q75": float(np.quantile(margins, 0.75)),
        "q100": float(np.max(margins)),
    }
    status = VIOLATED if worst else HOLDS
    return EstimateReport(
        theorem, status, constants, measured,
        float(max(0.0, -np.min(margins))),
        float(np.min(margins)), quant, worst[:16],
        admissible_points=admissible, extra=extra,
    )


def _check_hypotheses(theorem, params, bounds, measured, sup_u, A):
    tol = HYPOTHESIS_TOL
    if theorem in ("log-gradient-backward", "log-gradient-forward"):
        if sup_u > A:
            return "u-upper-bound-A"
        if measured["neg_scal_sup"] > bounds.rho1 + tol:
            return "scalar-lower-bound"
        if measured["grad_scal_sup"] > bounds.rho3 + tol:
            return "scalar-gradient-bound"
        if theorem == "log-gradient-backward":
            if measured["neg_ricci_eig_sup"] > bounds.rho2 + tol:
                return "ricci-lower-bound"
    elif theorem == "harnack-local":
        if params.alpha <= 1.0:
            return "alpha-greater-than-one"
        if measured["neg_scal_sup"] > bounds.rho1 + tol:
            return "scalar-lower-bound"
        if measured["neg_ricci_eig_sup"] > bounds.rho2 + tol:
            return "ricci-lower-bound"
    elif theorem == "harnack-global":
        if params.alpha > 1.0:
            if measured["neg_scal_sup"] > bounds.rho1 + tol:
                return "scalar-lower-bound"
            if measured["neg_ricci_eig_sup"] > bounds.rho2 + tol:
                return "ricci-lower-bound"
        else:
            if measured["neg_ricci_eig_sup"] > tol:
                return "ricci-nonnegative"
    elif theorem == "li-yau":
        if params.alpha != 1.0:
            return "alpha-equals-one"
        if measured["neg_ricci_eig_sup"] > tol:
            return "ricci-nonnegative"
    return None
