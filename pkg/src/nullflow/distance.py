"""Geodesic distance fields with cut-locus masking.

Three routes, chosen by grid/metric structure:

* symmetric-1d grids: arc length along the symmetry-reduced coordinate
  (exact up to quadrature error for the built-in symmetric scenarios);
* periodic grids with a constant diagonal metric: closed-form minimum-image
  distance;
* periodic grids with varying metrics: Dijkstra on a 16-neighbour graph
  (first-order accurate with a small metrication overestimate; adequate for
  cube membership tests at desk scale).

Nodes near the cut locus are masked invalid rather than raising: distance
there is only Lipschitz and its Laplacian is meaningless.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .grids import ONE_D_TOPOLOGIES, PERIODIC_2D, LeafGrid
from .metric import LeafMetric

CUT_LOCUS_MARGIN = 3  # in units of the grid spacing


@dataclass
class DistanceField:
    grid: LeafGrid
    values: np.ndarray
    valid: np.ndarray  # False within the cut-locus margin

    def masked(self) -> np.ndarray:
        out = self.values.copy()
        out[~self.valid] = np.nan
        return out


def _distance_symmetric(metric: LeafMetric, center: int) -> DistanceField:
    grid = metric.grid
    theta = grid.axes[0]
    h = grid.spacings[0]
    speed = np.sqrt(metric.comps[..., 0, 0])
    arc = cumulative_trapezoid(speed, theta, initial=0.0)
    d = np.abs(arc - arc[center])
    # cut locus sits past the far end of the chart (the collapsed antipode
    # for spherical charts); mask a margin of nodes at that end
    margin = CUT_LOCUS_MARGIN * h
    far_end = len(theta) - 1 if center <= len(theta) // 2 else 0
    if far_end:
        invalid = theta > theta[-1] - margin
    else:
        invalid = theta < theta[0] + margin
    return DistanceField(grid, d, ~invalid)


def _min_image(delta: np.ndarray, period: float) -> np.ndarray:
    return delta - period * np.round(delta / period)


def _is_constant_diagonal(metric: LeafMetric) -> bool:
    g = metric.comps
    if np.max(np.abs(g[..., 0, 1])) > 1e-13:
        return False
    return (
        np.ptp(g[..., 0, 0]) < 1e-13 * max(1.0, np.max(g[..., 0, 0]))
        and np.ptp(g[..., 1, 1]) < 1e-13 * max(1.0, np.max(g[..., 1, 1]))
    )


def _periodic_mask(grid: LeafGrid, center: tuple) -> np.ndarray:
    x, y = grid.coordinate_fields()
    hx, hy = grid.spacings
    lx = grid.shape[0] * hx
    ly = grid.shape[1] * hy
    dx = np.abs(_min_image(x - x[center], lx))
    dy = np.abs(_min_image(y - y[center], ly))
    near_cut = (dx >= lx / 2 - CUT_LOCUS_MARGIN * hx) | (dy >= ly / 2 - CUT_LOCUS_MARGIN * hy)
    return ~near_cut


def _distance_flat_periodic(metric: LeafMetric, center: tuple) -> DistanceField:
    grid = metric.grid
    x, y = grid.coordinate_fields()
    hx, hy = grid.spacings
    lx = grid.shape[0] * hx
    ly = grid.shape[1] * hy
    gxx = metric.comps[(0,) * grid.ndim_grid + (0, 0)]
    gyy = metric.comps[(0,) * grid.ndim_grid + (1, 1)]
    dx = _min_image(x - x[center], lx)
    dy = _min_image(y - y[center], ly)
    d = np.sqrt(gxx * dx**2 + gyy * dy**2)
    return DistanceField(grid, d, _periodic_mask(grid, center))


_NEIGHBOR_STEPS = [
    (di, dj)
    for di in (-2, -1, 0, 1, 2)
    for dj in (-2, -1, 0, 1, 2)
    if (di, dj) != (0, 0) and (abs(di) != 2 or abs(dj) != 2)
]


def _distance_dijkstra(metric: LeafMetric, center: tuple) -> DistanceField:
    grid = metric.grid
    nx, ny = grid.shape
    hx, hy = grid.spacings
    g = metric.comps
    dist = np.full(grid.shape, np.inf)
    dist[center] = 0.0
    heap = [(0.0, center)]
    visited = np.zeros(grid.shape, dtype=bool)
    while heap:
        d0, (i, j) = heapq.heappop(heap)
        if visited[i, j]:
            continue
        visited[i, j] = True
        for di, dj in _NEIGHBOR_STEPS:
            ii = (i + di) % nx
            jj = (j + dj) % ny
            if visited[ii, jj]:
                continue
            vx = di * hx
            vy = dj * hy
            gm = 0.5 * (g[i, j] + g[ii, jj])
            seg = np.sqrt(
                gm[0, 0] * vx * vx + 2.0 * gm[0, 1] * vx * vy + gm[1, 1] * vy * vy
            )
            nd = d0 + seg
            if nd < dist[ii, jj]:
                dist[ii, jj] = nd
                heapq.heappush(heap, (nd, (ii, jj)))
    return DistanceField(grid, dist, _periodic_mask(grid, center))


def geodesic_distance(metric: LeafMetric, center) -> DistanceField:
    """Distance to the given center node; cut-locus band flagged invalid."""
    metric.require_positive_definite()
    grid = metric.grid
    if grid.topology in ONE_D_TOPOLOGIES:
        return _distance_symmetric(metric, int(center))
    if grid.topology == PERIODIC_2D:
        center = tuple(center)
        if _is_constant_diagonal(metric):
            return _distance_flat_periodic(metric, center)
        return _distance_dijkstra(metric, center)
    raise ValueError(f"unsupported topology {grid.topology}")
