"""Leaf metrics, curvature tensors, and differential operators.

The leaf is a 2-D Riemannian manifold discretized on a structured grid.
Curvature on periodic grids comes from the standard finite-difference
Christoffel / Riemann construction.  On symmetric-1d grids (diagonal
metrics a(x) dx^2 + b(x) dy^2) the Gauss curvature is computed through the
surface-of-revolution formula

    K = -(1 / (2 sqrt(ab))) d/dx ( b' / sqrt(ab) ),

which stays uniformly second-order accurate up to the excluded poles of a
spherical chart, where the generic route loses accuracy to the cot(theta)
singularity of the Christoffel symbols.  In two dimensions the full
Riemann tensor is recovered exactly from K.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import (
    ONE_D_TOPOLOGIES,
    GridError,
    LeafGrid,
    ScalarField,
    field_values,
    mixed_deriv,
    partial_deriv,
    second_deriv,
)

DIM = 2  # leaf dimension for every built-in scenario


class MetricError(ValueError):
    pass


class SingularMetricError(MetricError):
    pass


@dataclass
class LeafMetric:
    """Symmetric positive-definite metric g'_ab sampled per node."""

    grid: LeafGrid
    comps: np.ndarray  # shape = grid.shape + (2, 2)

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        if self.comps.shape != self.grid.shape + (DIM, DIM):
            raise MetricError(f"metric component shape {self.comps.shape} invalid")
        if not np.allclose(self.comps[..., 0, 1], self.comps[..., 1, 0], atol=1e-14):
            raise MetricError("metric components are not symmetric")

    @property
    def dimension(self):
        return DIM

    def determinant(self) -> np.ndarray:
        g = self.comps
        return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]

    def min_eigenvalue(self) -> np.ndarray:
        g = self.comps
        tr = g[..., 0, 0] + g[..., 1, 1]
        det = self.determinant()
        disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
        return 0.5 * (tr - disc)

    def max_eigenvalue(self) -> np.ndarray:
        g = self.comps
        tr = g[..., 0, 0] + g[..., 1, 1]
        det = self.determinant()
        disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
        return 0.5 * (tr + disc)

    def is_positive_definite(self) -> bool:
        return bool(np.all(self.min_eigenvalue() > 0.0))

    def require_positive_definite(self):
        lam = self.min_eigenvalue()
        if np.any(lam <= 0.0):
            node = int(np.argmin(lam))
            raise SingularMetricError(
                f"metric not positive definite (node {node}, eigenvalue {lam.flat[node]:.3e})"
            )

    def inverse(self) -> np.ndarray:
        det = self.determinant()
        if np.any(det == 0.0):
            raise SingularMetricError("singular metric matrix")
        g = self.comps
        inv = np.empty_like(g)
        inv[..., 0, 0] = g[..., 1, 1] / det
        inv[..., 1, 1] = g[..., 0, 0] / det
        inv[..., 0, 1] = -g[..., 0, 1] / det
        inv[..., 1, 0] = -g[..., 1, 0] / det
        return inv

    def copy(self) -> "LeafMetric":
        return LeafMetric(self.grid, self.comps.copy())


@dataclass
class CurvaturePack:
    """Christoffel symbols and curvature tensors at every node."""

    grid: LeafGrid
    christoffel: np.ndarray  # shape + (c, a, b) -> Gamma^c_ab
    riemann: np.ndarray  # shape + (a, b, c, d) -> R_abcd (all indices down)
    ricci: np.ndarray  # shape + (a, b)
    scal: np.ndarray  # shape


def _metric_derivatives(metric: LeafMetric) -> np.ndarray:
    """dg[d, ..., a, b] = partial_d g_ab."""
    out = np.empty((DIM,) + metric.comps.shape)
    for d in range(DIM):
        out[d] = partial_deriv(metric.grid, metric.comps, axis=d)
    return out


def christoffel(metric: LeafMetric) -> np.ndarray:
    """Gamma^c_ab = 1/2 g^cd (d_a g_db + d_b g_da - d_d g_ab)."""
    metric.require_positive_definite()
    ginv = metric.inverse()
    dg = _metric_derivatives(metric)
    gamma = np.zeros(metric.grid.shape + (DIM, DIM, DIM))
    for c in range(DIM):
        for a in range(DIM):
            for b in range(DIM):
                acc = 0.0
                for d in range(DIM):
                    acc = acc + ginv[..., c, d] * (
                        dg[a][..., d, b] + dg[b][..., d, a] - dg[d][..., a, b]
                    )
                gamma[..., c, a, b] = 0.5 * acc
    return gamma


def _gauss_curvature_symmetric(metric: LeafMetric) -> np.ndarray:
    g = metric.comps
    if np.max(np.abs(g[..., 0, 1])) > 1e-12 * np.max(metric.max_eigenvalue()):
        raise MetricError("symmetric-1d curvature requires a diagonal metric")
    a = g[..., 0, 0]
    b = g[..., 1, 1]
    grid = metric.grid
    root = np.sqrt(a * b)
    inner = partial_deriv(grid, b, 0) / root
    return -partial_deriv(grid, inner, 0) / (2.0 * root)


def _gauss_curvature_generic(metric: LeafMetric, gamma: np.ndarray) -> np.ndarray:
    """Ricci via R^m_{s m n} from Gamma and its derivatives; returns K = Scal/2."""
    grid = metric.grid
    dgamma = np.empty((DIM,) + gamma.shape)
    for d in range(DIM):
        dgamma[d] = partial_deriv(grid, gamma, axis=d)
    # R^r_{s m n} = d_m Gamma^r_ns - d_n Gamma^r_ms + Gamma^r_ml Gamma^l_ns - Gamma^r_nl Gamma^l_ms
    ric = np.zeros(grid.shape + (DIM, DIM))
    for s in range(DIM):
        for n in range(DIM):
            acc = 0.0
            for m in range(DIM):
                term = dgamma[m][..., m, n, s] - dgamma[n][..., m, m, s]
                for l in range(DIM):
                    term = term + (
                        gamma[..., m, m, l] * gamma[..., l, n, s]
                        - gamma[..., m, n, l] * gamma[..., l, m, s]
                    )
                acc = acc + term
            ric[..., s, n] = acc
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    ginv = metric.inverse()
    scal = np.einsum("...ab,...ab->...", ginv, ric)
    return 0.5 * scal


def curvature(metric: LeafMetric) -> CurvaturePack:
    """Full curvature pack: Christoffel, Riemann (0,4), Ricci, scalar.

    In 2-D the Riemann tensor is K (g_ac g_bd - g_ad g_bc) and Ricci is
    K g, so the pack is assembled from the Gauss curvature K; the trace
    identity Scal = g^ab Ric_ab then holds by construction.
    """
    gamma = christoffel(metric)
    if metric.grid.topology in ONE_D_TOPOLOGIES:
        K = _gauss_curvature_symmetric(metric)
    else:
        K = _gauss_curvature_generic(metric, gamma)
    g = metric.comps
    ricci = K[..., None, None] * g
    scal = 2.0 * K
    riem = np.einsum(
        "...,...ac,...bd->...abcd", K, g, g
    ) - np.einsum("...,...ad,...bc->...abcd", K, g, g)
    return CurvaturePack(metric.grid, gamma, riem, ricci, scal)


def ricci(metric: LeafMetric) -> np.ndarray:
    """Ricci tensor only (used by the flow right-hand side)."""
    if metric.grid.topology in ONE_D_TOPOLOGIES:
        K = _gauss_curvature_symmetric(metric)
    else:
        K = _gauss_curvature_generic(metric, christoffel(metric))
    return K[..., None, None] * metric.comps


def gradient(metric: LeafMetric, field) -> np.ndarray:
    """Contravariant gradient (grad f)^a = g^ab d_b f, shape grid + (2,)."""
    values = field_values(field, metric.grid)
    ginv = metric.inverse()
    df = np.stack(
        [partial_deriv(metric.grid, values, axis=d) for d in range(DIM)], axis=-1
    )
    return np.einsum("...ab,...b->...a", ginv, df)


def grad_norm_sq(metric: LeafMetric, field) -> np.ndarray:
    """||grad f||^2 = g^ab d_a f d_b f >= 0."""
    values = field_values(field, metric.grid)
    ginv = metric.inverse()
    df = np.stack(
        [partial_deriv(metric.grid, values, axis=d) for d in range(DIM)], axis=-1
    )
    out = np.einsum("...ab,...a,...b->...", ginv, df, df)
    return np.maximum(out, 0.0)


def hessian(metric: LeafMetric, field, gamma: np.ndarray | None = None) -> np.ndarray:
    """Covariant Hessian f_ab = d_a d_b f - Gamma^c_ab d_c f."""
    values = field_values(field, metric.grid)
    grid = metric.grid
    if gamma is None:
        gamma = christoffel(metric)
    df = [partial_deriv(grid, values, axis=d) for d in range(DIM)]
    hess = np.empty(grid.shape + (DIM, DIM))
    hess[..., 0, 0] = second_deriv(grid, values, 0)
    hess[..., 1, 1] = second_deriv(grid, values, 1)
    cross = mixed_deriv(grid, values)
    hess[..., 0, 1] = cross
    hess[..., 1, 0] = cross
    for a in range(DIM):
        for b in range(DIM):
            for c in range(DIM):
                hess[..., a, b] -= gamma[..., c, a, b] * df[c]
    return hess


def laplace_beltrami(metric: LeafMetric, field, gamma: np.ndarray | None = None) -> np.ndarray:
    """Trace of the covariant Hessian (identical stencils, so the trace
    identity with :func:`hessian` is exact)."""
    hess = hessian(metric, field, gamma=gamma)
    ginv = metric.inverse()
    return np.einsum("...ab,...ab->...", ginv, hess)


def bochner_residual(metric: LeafMetric, field) -> np.ndarray:
    """Residual of Delta||grad f||^2 = 2||Hess f||^2 + 2<grad f, grad Delta f>
    + 2 Ric(grad f, grad f); converges to zero on smooth fields.

    The sign of the Hessian-squared term is the one that makes the residual
    vanish identically on the flat torus.
    """
    values = field_values(field, metric.grid)
    pack = curvature(metric)
    ginv = metric.inverse()
    gamma = pack.christoffel
    gradsq = grad_norm_sq(metric, values)
    lhs = laplace_beltrami(metric, gradsq, gamma=gamma)
    hess = hessian(metric, values, gamma=gamma)
    hess_sq = np.einsum("...ac,...bd,...ab,...cd->...", ginv, ginv, hess, hess)
    lap = laplace_beltrami(metric, values, gamma=gamma)
    df = np.stack([partial_deriv(metric.grid, values, d) for d in range(DIM)], axis=-1)
    dlap = np.stack([partial_deriv(metric.grid, lap, d) for d in range(DIM)], axis=-1)
    cross = np.einsum("...ab,...a,...b->...", ginv, df, dlap)
    ric_term = np.einsum("...ac,...bd,...cd,...a,...b->...", ginv, ginv, pack.ricci, df, df)
    return lhs - 2.0 * hess_sq - 2.0 * cross - 2.0 * ric_term


def ricci_identity_residual(metric: LeafMetric, field) -> np.ndarray:
    """Residual of the commutation rule for third covariant derivatives,

        div(Hess f)_i - (Delta f)_i = Ric_ij (grad f)^j,

    contracted against (grad f)^i.
    """
    values = field_values(field, metric.grid)
    grid = metric.grid
    pack = curvature(metric)
    gamma = pack.christoffel
    ginv = metric.inverse()
    hess = hessian(metric, values, gamma=gamma)
    # covariant divergence of the Hessian: B_i = g^jk ( d_k H_ij - G^l_ki H_lj - G^l_kj H_il )
    dhess = np.empty((DIM,) + hess.shape)
    for k in range(DIM):
        dhess[k] = partial_deriv(grid, hess, axis=k)
    cov = np.empty(grid.shape + (DIM, DIM, DIM))  # (k, i, j) -> nabla_k H_ij
    for k in range(DIM):
        for i in range(DIM):
            for j in range(DIM):
                term = dhess[k][..., i, j]
                for l in range(DIM):
                    term = term - gamma[..., l, k, i] * hess[..., l, j]
                    term = term - gamma[..., l, k, j] * hess[..., i, l]
                cov[..., k, i, j] = term
    div_hess = np.einsum("...jk,...kij->...i", ginv, cov)
    lap = np.einsum("...ab,...ab->...", ginv, hess)
    dlap = np.stack([partial_deriv(grid, lap, d) for d in range(DIM)], axis=-1)
    gradf = gradient(metric, values)
    ric_low = np.einsum("...ij,...j->...i", pack.ricci, gradf)
    resid = div_hess - dlap - ric_low
    return np.einsum("...i,...i->...", gradf, resid)
