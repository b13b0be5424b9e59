import numpy as np
import pytest

from nullflow.grids import (
    GridError,
    LeafGrid,
    ScalarField,
    field_values,
    grids_compatible,
    make_line_grid,
    make_sphere_grid,
    make_torus_grid,
    mixed_deriv,
    partial_deriv,
    second_deriv,
)


def test_torus_grid_shape_and_spacing():
    g = make_torus_grid(16)
    assert g.shape == (16, 16)
    assert np.isclose(g.spacings[0], 2 * np.pi / 16)
    assert g.axes[0][0] == 0.0


def test_sphere_grid_excludes_poles():
    g = make_sphere_grid(32)
    th = g.axes[0]
    assert th[0] > 0 and th[-1] < np.pi
    # cell-centered: reflection across 0 maps node 0 onto itself shifted
    assert np.isclose(th[0], 0.5 * g.spacings[0])


def test_min_node_count_enforced():
    with pytest.raises(GridError):
        make_torus_grid(4)


def test_scalar_field_rejects_nan():
    g = make_torus_grid(8)
    vals = np.zeros(g.shape)
    vals[3, 3] = np.nan
    with pytest.raises(GridError):
        ScalarField(g, vals)


def test_field_values_grid_mismatch():
    f = ScalarField(make_torus_grid(8), np.zeros((8, 8)))
    with pytest.raises(GridError):
        field_values(f, make_torus_grid(16))
    assert grids_compatible(make_torus_grid(8), make_torus_grid(8))


@pytest.mark.parametrize("n", [32, 64])
def test_periodic_first_derivative_order(n):
    g = make_torus_grid(n)
    x, y = g.coordinate_fields()
    d = partial_deriv(g, np.sin(x) * np.cos(y), axis=0)
    err = np.max(np.abs(d - np.cos(x) * np.cos(y)))
    assert err < 5.0 * (2 * np.pi / n) ** 2


def test_periodic_second_and_mixed_derivative():
    g = make_torus_grid(64)
    x, y = g.coordinate_fields()
    f = np.sin(x) * np.sin(2 * y)
    h = 2 * np.pi / 64
    assert np.max(np.abs(second_deriv(g, f, 0) + f)) < 5 * h**2
    assert np.max(np.abs(second_deriv(g, f, 1) + 4 * f)) < 20 * h**2
    mixed = mixed_deriv(g, f)
    exact = np.cos(x) * 2 * np.cos(2 * y)
    assert np.max(np.abs(mixed - exact)) < 20 * h**2


def test_sphere_stencils_uniformly_second_order():
    # even-symmetric scalar: the pole ghosts must not degrade the order
    errs = []
    for n in (32, 64, 128):
        g = make_sphere_grid(n)
        th = g.axes[0]
        d1 = partial_deriv(g, np.cos(th), axis=0)
        d2 = second_deriv(g, np.cos(th), axis=0)
        errs.append(max(np.max(np.abs(d1 + np.sin(th))), np.max(np.abs(d2 + np.cos(th)))))
    order = np.log2(errs[0] / errs[1])
    assert order > 1.9
    assert np.log2(errs[1] / errs[2]) > 1.9


def test_symmetry_axis_derivatives_vanish():
    g = make_sphere_grid(16)
    f = np.cos(g.axes[0])
    assert np.all(partial_deriv(g, f, axis=1) == 0.0)
    assert np.all(second_deriv(g, f, axis=1) == 0.0)
    assert np.all(mixed_deriv(g, f) == 0.0)


def test_line_grid_one_sided_ends():
    g = make_line_grid(64, 0.0, 1.0)
    x = g.axes[0]
    d = partial_deriv(g, x**3, axis=0)
    assert np.max(np.abs(d - 3 * x**2)) < 1e-2
