"""Built-in leaf scenarios.

* ``round-sphere``: radius-r sphere leaf in its rotationally symmetric
  reduction, g' = r^2 (dtheta^2 + sin^2(theta) dphi^2) on the open chart
  0 < theta < pi.
* ``flat-torus``: the flat square torus, g' = identity.
* ``torus-bump``: conformal perturbation of the flat torus,
  g' = (1 + amp sin x sin y) I with |amp| < 1.
"""
from __future__ import annotations

import numpy as np

from .grids import make_sphere_grid, make_torus_grid
from .metric import DIM, LeafMetric

SCENARIOS = ("round-sphere", "flat-torus", "torus-bump")

DEFAULT_RESOLUTION = 64


class ScenarioError(ValueError):
    pass


def sphere_metric(radius: float, n: int = DEFAULT_RESOLUTION) -> LeafMetric:
    if radius <= 0:
        raise ScenarioError("sphere radius must be positive")
    grid = make_sphere_grid(n)
    theta = grid.axes[0]
    comps = np.zeros(grid.shape + (DIM, DIM))
    comps[..., 0, 0] = radius**2
    comps[..., 1, 1] = radius**2 * np.sin(theta) ** 2
    return LeafMetric(grid, comps)


def flat_torus_metric(side: float = 2.0 * np.pi, n: int = DEFAULT_RESOLUTION) -> LeafMetric:
    if side <= 0:
        raise ScenarioError("torus side must be positive")
    grid = make_torus_grid(n, side=side)
    comps = np.zeros(grid.shape + (DIM, DIM))
    comps[..., 0, 0] = 1.0
    comps[..., 1, 1] = 1.0
    return LeafMetric(grid, comps)


def torus_bump_conformal_factor(amp: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 1.0 + amp * np.sin(x) * np.sin(y)


def torus_bump_metric(amp: float, n: int = DEFAULT_RESOLUTION) -> LeafMetric:
    if abs(amp) >= 1.0:
        raise ScenarioError(
            "bump amplitude must satisfy |amp| < 1 to keep the metric positive definite"
        )
    grid = make_torus_grid(n)
    x, y = grid.coordinate_fields()
    factor = torus_bump_conformal_factor(amp, x, y)
    comps = np.zeros(grid.shape + (DIM, DIM))
    comps[..., 0, 0] = factor
    comps[..., 1, 1] = factor
    return LeafMetric(grid, comps)


def build_scenario_metric(name: str, **params) -> LeafMetric:
    """Construct the leaf metric for a named scenario."""
    params = dict(params)
    if name == "round-sphere":
        metric = sphere_metric(
            params.pop("radius", 1.0), n=params.pop("resolution", DEFAULT_RESOLUTION)
        )
    elif name == "flat-torus":
        metric = flat_torus_metric(
            side=params.pop("side", 2.0 * np.pi),
            n=params.pop("resolution", DEFAULT_RESOLUTION),
        )
    elif name == "torus-bump":
        metric = torus_bump_metric(
            params.pop("amp", 0.2), n=params.pop("resolution", DEFAULT_RESOLUTION)
        )
    else:
        raise ScenarioError(f"unknown scenario {name!r}; choose one of {SCENARIOS}")
    if params:
        raise ScenarioError(f"unknown parameters for {name}: {sorted(params)}")
    return metric
