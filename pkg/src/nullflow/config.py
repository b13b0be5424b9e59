"""Run configuration: strict JSON parsing and validation.

A run document has up to six sections:

    {
      "scenario": {"name": "round-sphere", "radius": 1.0, "resolution": 64},
      "flow": {"direction": "forward", "t_end": 0.45, "dt_initial": 1e-4},
      "heat_initial": "cosine-mode",
      "estimates": {"alpha": 1.0, "p": 2.0, "q": 2.0, "rho": 0.7, "center": 32},
      "theorems": ["li-yau"],
      "seed": 0
    }

Unknown keys are rejected at every level; constraint violations name the
failing constraint.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .estimates import THEOREM_IDS, EstimateError, EstimateParams
from .flow import FlowConfig, FlowError
from .grids import ONE_D_TOPOLOGIES, ScalarField
from .metric import LeafMetric
from .scenarios import SCENARIOS, ScenarioError, build_scenario_metric

HEAT_INITIAL_IDS = ("constant", "cosine-mode")

_SCENARIO_KEYS = {
    "round-sphere": {"name", "radius", "resolution"},
    "flat-torus": {"name", "side", "resolution"},
    "torus-bump": {"name", "amp", "resolution"},
}
_FLOW_KEYS = {
    "direction", "t_end", "dt_initial", "dt_controller",
    "eps_singular_rel", "heat", "heat_t_max", "sample_every",
}
_ESTIMATE_KEYS = {"alpha", "p", "q", "rho", "center", "A", "ricci_upper"}
_TOP_KEYS = {"scenario", "flow", "heat_initial", "estimates", "theorems", "seed"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: dict
    flow: FlowConfig
    heat_initial: str | None = None
    estimates: EstimateParams | None = None
    theorems: tuple = ()
    seed: int = 0

    def build_metric(self) -> LeafMetric:
        params = {k: v for k, v in self.scenario.items() if k != "name"}
        return build_scenario_metric(self.scenario["name"], **params)

    def build_heat_initial(self, metric: LeafMetric) -> ScalarField | None:
        if self.heat_initial is None:
            return None
        grid = metric.grid
        if self.heat_initial == "constant":
            return ScalarField(grid, np.full(grid.shape, 2.0))
        # cosine-mode: one smooth mode above a positive floor
        if grid.topology in ONE_D_TOPOLOGIES:
            return ScalarField(grid, 2.0 + np.cos(grid.axes[0]))
        x, _ = grid.coordinate_fields()
        return ScalarField(grid, 2.0 + np.sin(x))


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run document (strict)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")
    _reject_unknown(doc, _TOP_KEYS, "document")

    scenario = doc.get("scenario")
    if not isinstance(scenario, dict) or "name" not in scenario:
        raise ConfigError("scenario section with a name is required")
    name = scenario["name"]
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    _reject_unknown(scenario, _SCENARIO_KEYS[name], f"scenario {name}")

    flow_doc = dict(doc.get("flow", {}))
    _reject_unknown(flow_doc, _FLOW_KEYS, "flow")
    try:
        flow = FlowConfig(**flow_doc)
    except (FlowError, TypeError) as exc:
        raise ConfigError(f"invalid flow section: {exc}")

    heat_initial = doc.get("heat_initial")
    if heat_initial is not None and heat_initial not in HEAT_INITIAL_IDS:
        raise ConfigError(
            f"unknown heat_initial {heat_initial!r}; choose from {HEAT_INITIAL_IDS}"
        )
    if flow.heat != "none" and heat_initial is None:
        raise ConfigError("flow.heat requires a heat_initial id")

    est_doc = doc.get("estimates")
    estimates = None
    if est_doc is not None:
        _reject_unknown(est_doc, _ESTIMATE_KEYS, "estimates")
        est_doc = dict(est_doc)
        if isinstance(est_doc.get("center"), list):
            est_doc["center"] = tuple(est_doc["center"])
        try:
            estimates = EstimateParams(**est_doc)
        except (EstimateError, TypeError) as exc:
            raise ConfigError(f"invalid estimates section: {exc}")

    theorems = tuple(doc.get("theorems", ()))
    for tid in theorems:
        if tid not in THEOREM_IDS:
            raise ConfigError(f"unknown theorem id {tid!r}; choose from {THEOREM_IDS}")
    if theorems and estimates is None:
        raise ConfigError("theorem verification requires an estimates section")
    if theorems and heat_initial is None:
        raise ConfigError("theorem verification requires heat_initial data")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")

    cfg = RunConfig(dict(scenario), flow, heat_initial, estimates, theorems, seed)
    try:
        cfg.build_metric()
    except ScenarioError as exc:
        raise ConfigError(f"invalid scenario parameters: {exc}")
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Serialize a RunConfig back to canonical JSON (round-trips parse_config)."""
    doc = {"scenario": cfg.scenario, "flow": {}, "seed": cfg.seed}
    f = cfg.flow
    doc["flow"] = {
        "direction": f.direction,
        "t_end": f.t_end,
        "dt_initial": f.dt_initial,
        "dt_controller": f.dt_controller,
        "eps_singular_rel": f.eps_singular_rel,
        "heat": f.heat,
        "sample_every": f.sample_every,
    }
    if f.heat_t_max is not None:
        doc["flow"]["heat_t_max"] = f.heat_t_max
    if cfg.heat_initial is not None:
        doc["heat_initial"] = cfg.heat_initial
    if cfg.estimates is not None:
        e = cfg.estimates
        est = {"alpha": e.alpha, "p": e.p, "q": e.q, "rho": e.rho}
        est["center"] = list(e.center) if isinstance(e.center, tuple) else e.center
        if e.A is not None:
            est["A"] = e.A
        if e.ricci_upper is not None:
            est["ricci_upper"] = e.ricci_upper
        doc["estimates"] = est
    if cfg.theorems:
        doc["theorems"] = list(cfg.theorems)
    return json.dumps(doc, indent=2, sort_keys=True)
