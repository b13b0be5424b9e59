import numpy as np
import pytest

from nullflow.grids import ScalarField, make_torus_grid
from nullflow.metric import (
    LeafMetric,
    MetricError,
    SingularMetricError,
    bochner_residual,
    christoffel,
    curvature,
    grad_norm_sq,
    gradient,
    hessian,
    laplace_beltrami,
    ricci,
    ricci_identity_residual,
)
from nullflow.scenarios import (
    flat_torus_metric,
    sphere_metric,
    torus_bump_conformal_factor,
    torus_bump_metric,
)

BUMP_AMP = 0.2


def _bump_log_derivs(x, y, h=1e-3):
    """Independent oracle: 4th-order stencil on the closed-form factor."""

    def psi(xx, yy):
        return 0.5 * np.log(torus_bump_conformal_factor(BUMP_AMP, xx, yy))

    def d4(f, xx, yy, axis):
        if axis == 0:
            vals = [f(xx + k * h, yy) for k in (-2, -1, 1, 2)]
        else:
            vals = [f(xx, yy + k * h) for k in (-2, -1, 1, 2)]
        return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)

    px = d4(psi, x, y, 0)
    py = d4(psi, x, y, 1)
    pxx = d4(lambda a, b: d4(psi, a, b, 0), x, y, 0)
    pyy = d4(lambda a, b: d4(psi, a, b, 1), x, y, 1)
    return px, py, pxx, pyy


def torus_bump_gauss_oracle(x, y):
    """K = -e^{-2 psi} (psi_xx + psi_yy) for the conformal metric e^{2 psi} I."""
    _, _, pxx, pyy = _bump_log_derivs(x, y)
    factor = torus_bump_conformal_factor(BUMP_AMP, x, y)
    return -(pxx + pyy) / factor


def test_metric_requires_symmetry():
    g = make_torus_grid(8)
    comps = np.zeros(g.shape + (2, 2))
    comps[..., 0, 0] = comps[..., 1, 1] = 1.0
    comps[..., 0, 1] = 0.1
    with pytest.raises(MetricError):
        LeafMetric(g, comps)


def test_positive_definiteness_reports_node():
    m = flat_torus_metric(n=8)
    m.comps[3, 4] = [[-1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(SingularMetricError) as exc:
        m.require_positive_definite()
    assert "node" in str(exc.value)


def test_inverse_closed_form():
    m = torus_bump_metric(BUMP_AMP, 16)
    ident = np.einsum("...ab,...bc->...ac", m.comps, m.inverse())
    eye = np.zeros_like(ident)
    eye[..., 0, 0] = eye[..., 1, 1] = 1.0
    assert np.max(np.abs(ident - eye)) < 1e-14


def test_flat_torus_christoffel_and_curvature_vanish():
    m = flat_torus_metric(n=16)
    assert np.max(np.abs(christoffel(m))) == 0.0
    pack = curvature(m)
    assert np.max(np.abs(pack.ricci)) == 0.0
    assert np.max(np.abs(pack.scal)) == 0.0


def test_sphere_christoffel_matches_symbols():
    n = 64
    m = sphere_metric(1.0, n)
    th = m.grid.axes[0]
    gamma = christoffel(m)
    h = np.pi / n
    assert np.max(np.abs(gamma[..., 0, 1, 1] + np.sin(th) * np.cos(th))) < 10 * h**2
    # cot(theta) blows up toward the poles; compare on the interior half
    mid = (th > np.pi / 4) & (th < 3 * np.pi / 4)
    assert np.max(np.abs(gamma[mid, 1, 0, 1] - 1.0 / np.tan(th[mid]))) < 10 * h**2


@pytest.mark.parametrize("radius", [1.0, 2.0])
def test_sphere_ricci_and_scal(radius):
    n = 64
    m = sphere_metric(radius, n)
    pack = curvature(m)
    K = 1.0 / radius**2
    assert np.max(np.abs(pack.ricci - K * m.comps)) < 5e-3 * max(1.0, radius**2)
    assert np.max(np.abs(pack.scal - 2.0 * K)) < 5e-3


def test_curvature_pack_invariants():
    m = torus_bump_metric(BUMP_AMP, 32)
    pack = curvature(m)
    r = pack.riemann
    assert np.max(np.abs(r + np.swapaxes(r, -4, -3))) == 0.0 or np.max(
        np.abs(r + np.swapaxes(r, -4, -3))
    ) < 1e-12
    assert np.max(np.abs(r + np.swapaxes(r, -2, -1))) < 1e-12
    assert np.max(np.abs(pack.ricci - np.swapaxes(pack.ricci, -2, -1))) == 0.0
    trace = np.einsum("...ab,...ab->...", m.inverse(), pack.ricci)
    assert np.max(np.abs(trace - pack.scal)) < 1e-12


def test_torus_bump_ricci_matches_fine_stencil_oracle():
    n = 64
    m = torus_bump_metric(BUMP_AMP, n)
    x, y = m.grid.coordinate_fields()
    K_oracle = torus_bump_gauss_oracle(x, y)
    pack = curvature(m)
    h = 2 * np.pi / n
    assert np.max(np.abs(pack.ricci - K_oracle[..., None, None] * m.comps)) < 10 * h**2


def test_torus_bump_christoffel_matches_oracle():
    n = 64
    m = torus_bump_metric(BUMP_AMP, n)
    x, y = m.grid.coordinate_fields()
    px, py, _, _ = _bump_log_derivs(x, y)
    gamma = christoffel(m)
    h = 2 * np.pi / n
    # conformal metric e^{2 psi} I: Gamma^x_xx = psi_x, Gamma^x_yy = -psi_x,
    # Gamma^x_xy = psi_y (and x<->y symmetric counterparts)
    assert np.max(np.abs(gamma[..., 0, 0, 0] - px)) < 10 * h**2
    assert np.max(np.abs(gamma[..., 0, 1, 1] + px)) < 10 * h**2
    assert np.max(np.abs(gamma[..., 0, 0, 1] - py)) < 10 * h**2
    assert np.max(np.abs(gamma[..., 1, 0, 0] + py)) < 10 * h**2


def test_gradient_and_norm():
    m = flat_torus_metric(n=64)
    x, y = m.grid.coordinate_fields()
    f = ScalarField(m.grid, np.sin(x))
    v = gradient(m, f)
    h = 2 * np.pi / 64
    assert np.max(np.abs(v[..., 0] - np.cos(x))) < 5 * h**2
    assert np.max(np.abs(grad_norm_sq(m, f) - np.cos(x) ** 2)) < 10 * h**2
    const = ScalarField(m.grid, np.full(m.grid.shape, 3.0))
    assert np.max(np.abs(gradient(m, const))) == 0.0


def test_sphere_gradient_norm():
    m = sphere_metric(1.0, 64)
    th = m.grid.axes[0]
    f = ScalarField(m.grid, np.cos(th))
    h = np.pi / 64
    assert np.max(np.abs(grad_norm_sq(m, f) - np.sin(th) ** 2)) < 10 * h**2


def test_laplace_beltrami_sphere_eigenfunction():
    # cos(theta) is the l=1 zonal harmonic: Delta cos = -2 cos on the unit sphere
    m = sphere_metric(1.0, 96)
    th = m.grid.axes[0]
    lap = laplace_beltrami(m, np.cos(th))
    assert np.max(np.abs(lap + 2.0 * np.cos(th))) < 5e-3


def test_laplace_beltrami_flat_mode():
    m = flat_torus_metric(n=64)
    x, y = m.grid.coordinate_fields()
    f = np.sin(x) * np.sin(y)
    lap = laplace_beltrami(m, f)
    h = 2 * np.pi / 64
    assert np.max(np.abs(lap + 2.0 * f)) < 20 * h**2


def test_hessian_trace_equals_laplacian():
    m = torus_bump_metric(BUMP_AMP, 32)
    x, y = m.grid.coordinate_fields()
    f = np.sin(x) + np.cos(y)
    hess = hessian(m, f)
    trace = np.einsum("...ab,...ab->...", m.inverse(), hess)
    assert np.max(np.abs(trace - laplace_beltrami(m, f))) < 1e-12


def test_bochner_residual_decays_at_second_order():
    errs = []
    for n in (32, 64):
        m = sphere_metric(1.0, n)
        th = m.grid.axes[0]
        errs.append(np.max(np.abs(bochner_residual(m, np.cos(th)))))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_ricci_identity_residual_decays():
    errs = []
    for n in (32, 64):
        m = torus_bump_metric(BUMP_AMP, n)
        x, y = m.grid.coordinate_fields()
        errs.append(np.max(np.abs(ricci_identity_residual(m, np.sin(x) * np.sin(y)))))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_ricci_fast_path_matches_pack():
    m = torus_bump_metric(BUMP_AMP, 32)
    assert np.max(np.abs(ricci(m) - curvature(m).ricci)) == 0.0
