"""Pricing strategies and the local-feature opportunity-cost model.

Strategies: the basic option-provision strategies (single only, shared
only, both, all at standard fares), the myopic pricing strategy that
maximizes immediate expected profit, and the rollout pricing strategy
that shifts margins by a parametric opportunity cost computed from local
demand, supply, and congestion features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pricing
from .choice import SHARED, SINGLE, ChoiceParams, option_utility
from .demand import DemandSpec, local_demand_intensity, nodes_within
from .errors import ConfigError
from .fleet import FeasibleSet, OperationRules, TripOption, vehicle_xy
from .network import GridSpec, NetworkState

BASIC_SINGLE = "S"
BASIC_SHARED = "Sh"
BASIC_BOTH = "S+Sh"
MYOPIC = "PM"
ROLLOUT = "PO"
NO_FLEET = "none"

STRATEGY_KINDS = (BASIC_SINGLE, BASIC_SHARED, BASIC_BOTH, MYOPIC, ROLLOUT, NO_FLEET)

N_FEATURES = 5


@dataclass(frozen=True)
class PolicyParams:
    """Two 5-vectors weighting local features into opportunity costs."""

    theta_single: tuple
    theta_shared: tuple

    def __post_init__(self):
        if len(self.theta_single) != N_FEATURES or len(self.theta_shared) != N_FEATURES:
            raise ConfigError(f"policy parameters must be {N_FEATURES}-vectors")
        if not all(np.isfinite(self.theta_single)) or not all(np.isfinite(self.theta_shared)):
            raise ConfigError("policy parameters must be finite")

    @classmethod
    def zeros(cls) -> "PolicyParams":
        return cls((0.0,) * N_FEATURES, (0.0,) * N_FEATURES)

    @classmethod
    def from_flat(cls, values) -> "PolicyParams":
        values = tuple(float(v) for v in values)
        if len(values) != 2 * N_FEATURES:
            raise ConfigError(f"expected {2 * N_FEATURES} policy values")
        return cls(values[:N_FEATURES], values[N_FEATURES:])

    def as_flat(self) -> tuple:
        return tuple(self.theta_single) + tuple(self.theta_shared)


@dataclass(frozen=True)
class LocalFeatures:
    """Averages over the radius around a request's origin and destination."""

    origin_demand: float       # outflow intensity near origin, per minute
    dest_demand: float         # outflow intensity near destination
    origin_supply: float       # spare-capacity vehicles near origin
    origin_inv_speed: float    # mean 1/speed near origin, h/km
    dest_inv_speed: float      # mean 1/speed near destination

    def as_array(self) -> np.ndarray:
        return np.array([self.origin_demand, self.dest_demand, self.origin_supply,
                         self.origin_inv_speed, self.dest_inv_speed])


class FeatureIndex:
    """Static geometry lookups: nodes and links within the feature radius."""

    def __init__(self, grid: GridSpec, net: NetworkState, radius_km: float):
        self.radius_km = radius_km
        self.node_neighbors = [nodes_within(grid, v, radius_km) for v in range(grid.n_nodes)]
        self.local_links = []
        for v in range(grid.n_nodes):
            cx, cy = grid.node_xy(v)
            d = np.hypot(net.link_mid_xy[:, 0] - cx, net.link_mid_xy[:, 1] - cy)
            self.local_links.append(np.nonzero(d <= radius_km + 1e-12)[0])


def compute_features(net: NetworkState, demand: DemandSpec, vehicles, origin: int,
                     dest: int, t: int, radius_km: float, rules: OperationRules,
                     index: FeatureIndex | None = None) -> LocalFeatures:
    """Local feature tuple for one request."""
    if index is None:
        index = FeatureIndex(net.grid, net, radius_km)
    out = demand.outflow_at(t)
    lam_o = float(out[index.node_neighbors[origin]].mean())
    lam_d = float(out[index.node_neighbors[dest]].mean())

    ox, oy = net.grid.node_xy(origin)
    supply = 0
    for veh in vehicles:
        if not veh.spare_shared_capacity(rules):
            continue
        vx, vy = vehicle_xy(veh, net)
        if (vx - ox) ** 2 + (vy - oy) ** 2 <= radius_km ** 2 + 1e-9:
            supply += 1

    inv_o = float(np.mean(1.0 / net.speed[index.local_links[origin]]))
    inv_d = float(np.mean(1.0 / net.speed[index.local_links[dest]]))
    return LocalFeatures(lam_o, lam_d, supply, inv_o, inv_d)


def opportunity_cost(option_type: str, features: LocalFeatures, params: PolicyParams,
                     scales=None) -> float:
    """Linear opportunity-cost estimate for accepting one option now.

    ``scales`` optionally standardizes the feature vector (training aid);
    omit it for the raw inner product.
    """
    theta = params.theta_single if option_type == SINGLE else params.theta_shared
    x = features.as_array()
    if scales is not None:
        x = x / np.asarray(scales, dtype=float)
    return float(np.dot(theta, x))


@dataclass(frozen=True)
class Strategy:
    kind: str
    params: PolicyParams | None = None
    feature_scales: tuple | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {self.kind!r}; choose from {STRATEGY_KINDS}")
        if self.kind == ROLLOUT and self.params is None:
            raise ConfigError("rollout strategy needs policy parameters")

    @property
    def prices(self) -> bool:
        return self.kind in (MYOPIC, ROLLOUT)


def feature_scales(total_demand: float, horizon: int, fleet_size: int,
                   v_max: float) -> tuple:
    """Per-coordinate scales so one optimizer step size fits all features."""
    lam = max(total_demand / max(horizon, 1), 1e-9)
    return (lam, lam, float(max(fleet_size, 1)), 1.0 / v_max, 1.0 / v_max)


def make_strategy(kind: str, scenario=None, params: PolicyParams | None = None) -> Strategy:
    """Build a strategy; rollout derives feature scales from the scenario."""
    if kind == ROLLOUT:
        if params is None:
            raise ConfigError("rollout strategy needs policy parameters")
        scales = None
        if scenario is not None:
            scales = feature_scales(scenario.demand.total_expected, scenario.horizon,
                                    scenario.fleet_size, scenario.fd.v_max)
        return Strategy(kind, params=params, feature_scales=scales)
    return Strategy(kind)


@dataclass
class OfferContext:
    """Everything a strategy may consult when pricing one request."""

    net: NetworkState
    vehicles: list
    demand: DemandSpec
    choice_params: ChoiceParams
    rules: OperationRules
    t: int
    radius_km: float
    feature_index: FeatureIndex | None = None
    delta_min: float | None = None
    delta_max: float | None = None


def decide_offer(strategy: Strategy, request, feasible: FeasibleSet,
                 ctx: OfferContext, v0: float) -> list[tuple[TripOption, float]]:
    """Priced offer for one request: (option, fare adjustment) pairs.

    An empty list means no service is offered and the traveler picks
    between the original mode and cancellation.
    """
    if strategy.kind == NO_FLEET:
        return []
    if strategy.kind == BASIC_SINGLE:
        return [(feasible.single, 0.0)] if feasible.single else []
    if strategy.kind == BASIC_SHARED:
        return [(feasible.shared, 0.0)] if feasible.shared else []
    if strategy.kind == BASIC_BOTH:
        return [(opt, 0.0) for opt in feasible.options()]

    options = feasible.options()
    if not options:
        return []

    if strategy.kind == ROLLOUT:
        feats = compute_features(ctx.net, ctx.demand, ctx.vehicles, request.origin,
                                 request.destination, ctx.t, ctx.radius_km, ctx.rules,
                                 ctx.feature_index)
        costs = [opportunity_cost(opt.option_type, feats, strategy.params,
                                  strategy.feature_scales) for opt in options]
    else:
        costs = [0.0 for _ in options]

    priced = tuple(
        pricing.PricingOption(
            option_type=opt.option_type,
            fare=opt.fare,
            cost=opt.cost,
            travel_time=opt.travel_time,
            base_utility=option_utility(opt.option_type, opt.fare, 0.0,
                                        opt.travel_time, ctx.choice_params),
            opportunity_cost=a,
        )
        for opt, a in zip(options, costs))
    inst = pricing.PricingInstance(
        options=priced, v0=v0,
        sens=pricing.scaled_sensitivities(ctx.choice_params),
        delta_min=ctx.delta_min, delta_max=ctx.delta_max)
    solution = pricing.solve_pricing(inst)
    return list(zip(options, solution.deltas))


# -- policy parameter text format -----------------------------------------

THETA_HEADER = ("theta_s.origin_demand theta_s.dest_demand theta_s.origin_supply "
                "theta_s.origin_inv_speed theta_s.dest_inv_speed "
                "theta_sh.origin_demand theta_sh.dest_demand theta_sh.origin_supply "
                "theta_sh.origin_inv_speed theta_sh.dest_inv_speed")


def save_policy_params(params: PolicyParams, path):
    with open(path, "w") as fh:
        fh.write("# rollout policy parameters (standardized feature units)\n")
        fh.write(f"# {THETA_HEADER}\n")
        fh.write(" ".join(f"{v:.12g}" for v in params.as_flat()) + "\n")


def load_policy_params(path) -> PolicyParams:
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values.extend(float(tok) for tok in line.split())
    return PolicyParams.from_flat(values)
