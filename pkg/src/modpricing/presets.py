"""Scenario configuration: YAML documents, named presets, resolution.

A scenario file mirrors the Scenario fields section by section. A
``preset`` key pulls in a named base configuration first; any other keys
override it. The desk preset is a small instance used throughout the test
suite; the paper-scale preset family spans the full experiment grid.
"""

from __future__ import annotations

import copy
import re

import yaml

from .choice import ChoiceParams
from .demand import DemandPeak, DemandShape, scale_background, synth_demand, DemandSpec
from .engine import Scenario
from .errors import ConfigError
from .fleet import OperationRules, Tariff
from .network import BackgroundProfile, BlendParams, FlowDensityParams, GridSpec

DESK = {
    "name": "desk",
    "grid": {"rows": 5, "cols": 5, "link_length_km": 0.7},
    "flow_density": {"v_max": 60.0, "k_free": 1.0, "k_jam": 6.0, "v_floor": 2.0},
    "blend": {"exposure": 0.2, "k0": 0.95},
    "tariff": {"base_fare": 1.0, "per_km": 0.25, "per_min": 0.01,
               "shared_ratio": 0.6, "cost_per_km": 0.07},
    "choice": {"mu": 0.5, "vot": 0.03, "asc_single": 4.5, "asc_shared": 4.0,
               "asc_original": 5.0, "e1": 1.0, "e2": 2.0,
               "b_time_shared": 1.2, "b_fare_original": 2.5},
    "rules": {"max_parties": 3, "single_pickup_km": 5.0, "shared_pickup_km": 2.0,
              "max_detour_km": 2.0, "max_detour_min": 5.0},
    "fleet_size": 20,
    "horizon": 480,
    "total_requests": 2000,
    "psi_c": "medium",
    "background": {"uniform": 2.0},
    "demand": {
        "shape": {
            "peaks": [
                # morning flow into the north-east quarter
                {"center": 6, "spread_km": 0.9, "dest_center": 18,
                 "dest_spread_km": 1.1, "time_weights": [3.0, 1.0, 0.5, 0.8],
                 "weight": 1.0},
                # evening counter-flow
                {"center": 18, "spread_km": 0.9, "dest_center": 6,
                 "dest_spread_km": 1.1, "time_weights": [0.5, 0.8, 1.0, 3.0],
                 "weight": 1.0},
                # uniform base load
                {"center": None, "time_weights": [1.0, 1.0, 1.0, 1.0],
                 "weight": 0.7},
            ]
        }
    },
    "feature_radius_km": 2.0,
    "t_ave_weight": "blended",
}

_PAPER_BASE = {
    "name": "paper",
    "grid": {"rows": 10, "cols": 10, "link_length_km": 0.78},
    "flow_density": {"v_max": 60.0, "k_free": 1.0, "k_jam": 6.0, "v_floor": 2.0},
    "tariff": {"base_fare": 1.0, "per_km": 0.25, "per_min": 0.01,
               "shared_ratio": 0.6, "cost_per_km": 0.07},
    "choice": {"mu": 0.5, "vot": 0.03, "asc_single": 4.5, "asc_shared": 4.0,
               "asc_original": 5.0, "e1": 1.0, "e2": 2.0,
               "b_time_shared": 1.2, "b_fare_original": 2.5},
    "rules": {"max_parties": 3, "single_pickup_km": 5.0, "shared_pickup_km": 2.0,
              "max_detour_km": 2.0, "max_detour_min": 5.0},
    "fleet_size": 750,
    "horizon": 1440,
    "total_requests": 100_000,
    "psi_c": "medium",
    "background": {"uniform": 2.0},
    "demand": {
        "shape": {
            "peaks": [
                {"center": 33, "spread_km": 1.8, "dest_center": 66,
                 "dest_spread_km": 2.2, "time_weights": [0.3, 3.0, 1.0, 0.8, 1.0, 0.5],
                 "weight": 1.0},
                {"center": 66, "spread_km": 1.8, "dest_center": 33,
                 "dest_spread_km": 2.2, "time_weights": [0.3, 0.5, 1.0, 0.8, 3.0, 1.0],
                 "weight": 1.0},
                {"center": None, "time_weights": [0.4, 1.0, 1.0, 1.0, 1.0, 0.6],
                 "weight": 0.8},
            ]
        }
    },
    "feature_radius_km": 2.0,
    "t_ave_weight": "blended",
}

PAPER_FLEET_SIZES = (500, 750, 1000, 1250)
PAPER_SHARED_RATIOS = (0.4, 0.6, 0.8)
PAPER_ORIGINAL_COST_FACTORS = (2.5, 5.0)
PAPER_EXPOSURES = (0.1, 0.2, 0.4)
PAPER_CONGESTION_LEVELS = ("low", "medium", "high")
# density conversion factor paired with the original-mode cost factor
K0_BY_COST_FACTOR = {2.5: 0.95, 5.0: 0.8}

_PAPER_NAME = re.compile(
    r"^paper-n(?P<n>\d+)-rsh(?P<rsh>[\d.]+)-bfo(?P<bfo>[\d.]+)"
    r"-phi(?P<phi>[\d.]+)-psi(?P<psi>low|medium|high)$")


def paper_preset(fleet_size: int, shared_ratio: float, cost_factor: float,
                 exposure: float, psi_c: str) -> dict:
    """One cell of the paper-scale experiment grid."""
    if cost_factor not in K0_BY_COST_FACTOR:
        raise ConfigError(f"original cost factor must be one of "
                          f"{sorted(K0_BY_COST_FACTOR)}, got {cost_factor}")
    d = copy.deepcopy(_PAPER_BASE)
    d["name"] = (f"paper-n{fleet_size}-rsh{shared_ratio:g}-bfo{cost_factor:g}"
                 f"-phi{exposure:g}-psi{psi_c}")
    d["fleet_size"] = fleet_size
    d["tariff"]["shared_ratio"] = shared_ratio
    d["choice"]["b_fare_original"] = cost_factor
    d["blend"] = {"exposure": exposure, "k0": K0_BY_COST_FACTOR[cost_factor]}
    d["psi_c"] = psi_c
    return d


def preset(name: str) -> dict:
    if name == "desk":
        return copy.deepcopy(DESK)
    m = _PAPER_NAME.match(name)
    if m:
        return paper_preset(int(m["n"]), float(m["rsh"]), float(m["bfo"]),
                            float(m["phi"]), m["psi"])
    raise ConfigError(
        f"unknown preset {name!r}; use 'desk' or "
        f"'paper-n<N>-rsh<R>-bfo<B>-phi<P>-psi<low|medium|high>'")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_scenario_dict(source: str) -> dict:
    """Read a scenario document from a preset name or a YAML file path."""
    try:
        return preset(source)
    except ConfigError:
        pass
    try:
        with open(source) as fh:
            d = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario {source!r} is neither a preset name nor a file")
    except yaml.YAMLError as e:
        raise ConfigError(f"{source}: invalid YAML: {e}")
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: scenario document must be a mapping")
    if "preset" in d:
        base = preset(str(d.pop("preset")))
        d = _merge(base, d)
    return d


def save_scenario_dict(d: dict, path):
    with open(path, "w") as fh:
        yaml.safe_dump(d, fh, sort_keys=False)


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return d[key]


def _build_demand(section: dict, grid: GridSpec, total: float, horizon: int):
    if "file" in section:
        return DemandSpec.load(section["file"], horizon, grid.n_nodes)
    if "shape" not in section:
        raise ConfigError("demand: need either 'file' or 'shape'")
    peaks_cfg = _require(section["shape"], "peaks", "demand.shape")
    peaks = []
    for p in peaks_cfg:
        peaks.append(DemandPeak(
            center=p.get("center"),
            spread_km=float(p.get("spread_km", 1.0)),
            time_weights=tuple(p.get("time_weights", (1.0,))),
            dest_center=p.get("dest_center"),
            dest_spread_km=p.get("dest_spread_km"),
            weight=float(p.get("weight", 1.0)),
        ))
    return synth_demand(DemandShape(peaks), grid, total, horizon)


def _build_background(section: dict, n_links: int) -> BackgroundProfile:
    if "file" in section:
        return BackgroundProfile.load(section["file"], n_links)
    if "uniform" in section:
        return BackgroundProfile.uniform(float(section["uniform"]), n_links)
    if "levels" in section:
        times = [int(t) for t, _ in section["levels"]]
        vals = [float(v) for _, v in section["levels"]]
        return BackgroundProfile(times, vals, n_links)
    raise ConfigError("background: need one of 'file', 'uniform', 'levels'")


def resolve_scenario(d: dict) -> Scenario:
    """Validate a scenario document and build the runnable Scenario."""
    grid = GridSpec(**_require(d, "grid", "scenario"))
    fd = FlowDensityParams(**d.get("flow_density", {}))
    blend = BlendParams(**d.get("blend", {}))
    tariff = Tariff(**d.get("tariff", {}))
    choice = ChoiceParams(**d.get("choice", {}))
    rules = OperationRules(**d.get("rules", {}))
    horizon = int(_require(d, "horizon", "scenario"))
    total = float(_require(d, "total_requests", "scenario"))
    demand = _build_demand(_require(d, "demand", "scenario"), grid, total, horizon)
    background = _build_background(_require(d, "background", "scenario"), grid.n_links)
    psi_c = d.get("psi_c", "medium")
    background = scale_background(background, psi_c)
    if isinstance(psi_c, str):
        from .demand import CONGESTION_FACTORS
        psi_value = CONGESTION_FACTORS[psi_c.lower()]
    else:
        psi_value = float(psi_c)
    try:
        return Scenario(
            name=str(d.get("name", "scenario")),
            grid=grid, fd=fd, blend=blend, tariff=tariff, choice_params=choice,
            rules=rules, demand=demand, background=background,
            fleet_size=int(_require(d, "fleet_size", "scenario")),
            horizon=horizon, psi_c=psi_value,
            feature_radius_km=float(d.get("feature_radius_km", 2.0)),
            t_ave_weight=str(d.get("t_ave_weight", "blended")),
            delta_min=d.get("delta_min"),
            delta_max=d.get("delta_max"),
        )
    except TypeError as e:
        raise ConfigError(f"scenario: {e}")


def load_scenario(source: str) -> Scenario:
    return resolve_scenario(load_scenario_dict(source))
