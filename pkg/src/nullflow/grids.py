"""Structured leaf grids and finite-difference derivative stencils.

Two grid kinds are supported:

* ``periodic-2d``: an Nx x Ny doubly periodic grid (flat torus and
  perturbations of it).  All stencils wrap around.
* ``symmetric-1d``: a 1-D grid in a single coordinate (called theta below)
  carrying a rotationally symmetric 2-D geometry.  Fields depend on theta
  only; derivatives along the symmetry coordinate vanish identically.
  Spherical scenarios live here with theta restricted to the open interval
  (0, pi), so the poles are never grid nodes.

All stencils are second order: central differences in the interior and
second-order one-sided differences at the ends of a symmetric-1d grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PERIODIC_2D = "periodic-2d"
SYMMETRIC_1D = "symmetric-1d"
SPHERICAL_1D = "spherical-collapsed-poles"
TOPOLOGIES = (PERIODIC_2D, SYMMETRIC_1D, SPHERICAL_1D)
ONE_D_TOPOLOGIES = (SYMMETRIC_1D, SPHERICAL_1D)

_MIN_NODES = 8


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LeafGrid:
    """Discretization of a leaf coordinate chart."""

    topology: str
    axes: tuple  # tuple of 1-D coordinate arrays
    spacings: tuple  # grid spacing per axis

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise GridError(f"unknown topology {self.topology!r}")
        for ax, h in zip(self.axes, self.spacings):
            if len(ax) < _MIN_NODES:
                raise GridError(f"need at least {_MIN_NODES} nodes per axis, got {len(ax)}")
            if h <= 0:
                raise GridError("grid spacing must be positive")

    @property
    def shape(self):
        return tuple(len(ax) for ax in self.axes)

    @property
    def ndim_grid(self):
        return len(self.axes)

    @property
    def num_nodes(self):
        return int(np.prod(self.shape))

    def coordinate_fields(self):
        """Coordinate values broadcast to the grid shape."""
        if self.topology == PERIODIC_2D:
            return np.meshgrid(*self.axes, indexing="ij")
        return (self.axes[0].copy(),)


def make_torus_grid(n: int, side: float = 2.0 * np.pi, ny: int | None = None) -> LeafGrid:
    """Doubly periodic grid on [0, side) x [0, side)."""
    ny = n if ny is None else ny
    hx = side / n
    hy = side / ny
    x = np.arange(n) * hx
    y = np.arange(ny) * hy
    return LeafGrid(PERIODIC_2D, (x, y), (hx, hy))


def make_sphere_grid(n: int) -> LeafGrid:
    """Cell-centered theta grid on (0, pi); the poles are never nodes.

    Nodes sit at theta_i = (i + 1/2) h, i = 0..n-1 with h = pi/n, so even
    reflection across the collapsed poles maps ghost nodes exactly onto
    interior nodes and central stencils apply everywhere.
    """
    h = np.pi / n
    theta = (np.arange(n) + 0.5) * h
    return LeafGrid(SPHERICAL_1D, (theta,), (h,))


def make_line_grid(n: int, start: float = 0.0, stop: float = 1.0) -> LeafGrid:
    """Non-periodic 1-D patch carrying a symmetric 2-D geometry."""
    x = np.linspace(start, stop, n)
    return LeafGrid(SYMMETRIC_1D, (x,), (x[1] - x[0],))


@dataclass
class ScalarField:
    """Node-sampled scalar quantity on a leaf grid."""

    grid: LeafGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("scalar field contains non-finite values")


def grids_compatible(a: LeafGrid, b: LeafGrid) -> bool:
    if a is b:
        return True
    if a.topology != b.topology or a.shape != b.shape:
        return False
    return all(np.allclose(ax, bx) for ax, bx in zip(a.axes, b.axes))


def field_values(field, grid: LeafGrid | None = None) -> np.ndarray:
    """Unwrap a ScalarField (checking its grid) or pass an array through."""
    if isinstance(field, ScalarField):
        if grid is not None and not grids_compatible(field.grid, grid):
            raise GridError("field grid does not match metric grid")
        return field.values
    return np.asarray(field, dtype=float)


def _extend_even(values: np.ndarray) -> np.ndarray:
    """Two ghost nodes on each end by even reflection across the poles.

    Valid for rotationally symmetric scalars on a collapsed-pole chart
    (smooth such quantities are even across both poles).
    """
    return np.concatenate([values[1::-1], values, values[:-3:-1]], axis=0)


def partial_deriv(grid: LeafGrid, values: np.ndarray, axis: int) -> np.ndarray:
    """First derivative along a coordinate axis, second order."""
    values = np.asarray(values, dtype=float)
    if grid.topology == PERIODIC_2D:
        h = grid.spacings[axis]
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    # 1-D reductions: derivatives along the symmetry coordinate vanish
    if axis == 1:
        return np.zeros_like(values)
    h = grid.spacings[0]
    if grid.topology == SPHERICAL_1D:
        ext = _extend_even(values)
        return (ext[2:] - ext[:-2])[1:-1] / (2.0 * h)
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def second_deriv(grid: LeafGrid, values: np.ndarray, axis: int) -> np.ndarray:
    """Pure second derivative along one axis (3-point stencil)."""
    values = np.asarray(values, dtype=float)
    if grid.topology == PERIODIC_2D:
        h = grid.spacings[axis]
        return (
            np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)
        ) / h**2
    if axis == 1:
        return np.zeros_like(values)
    h = grid.spacings[0]
    if grid.topology == SPHERICAL_1D:
        ext = _extend_even(values)
        return (ext[2:] - 2.0 * ext[1:-1] + ext[:-2])[1:-1] / h**2
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / h**2
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h**2
    out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / h**2
    return out


def mixed_deriv(grid: LeafGrid, values: np.ndarray) -> np.ndarray:
    """Mixed second derivative d^2/dx0 dx1 (zero on 1-D reduced grids)."""
    if grid.topology in ONE_D_TOPOLOGIES:
        return np.zeros_like(np.asarray(values, dtype=float))
    return partial_deriv(grid, partial_deriv(grid, values, 0), 1)
