"""Discrete-time episode loop and system-level metric accumulation.

One episode simulates a day minute by minute: sample new requests, build
and price offers, sample traveler choices, confirm accepted trips, move
vehicles, then refresh network densities and speeds. Everything is
deterministic given (scenario, strategy, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .choice import (CANCEL, ORIGINAL, SHARED, SINGLE, ChoiceParams,
                     choice_probabilities, option_utility, outside_utility,
                     sample_choice)
from .demand import DemandSpec, sample_requests
from .errors import ConfigError
from .fleet import (OperationRules, Tariff, Vehicle, advance_vehicles,
                    build_feasible_set, confirm_trip)
from .network import (BackgroundProfile, BlendParams, FlowDensityParams,
                      GridSpec, NetworkState, build_grid)
from .policy import FeatureIndex, OfferContext, Strategy, decide_offer

DRAIN_CAP_FACTOR = 10


@dataclass
class Scenario:
    """Immutable experiment configuration shared across parallel episodes."""

    name: str
    grid: GridSpec
    fd: FlowDensityParams
    blend: BlendParams
    tariff: Tariff
    choice_params: ChoiceParams
    rules: OperationRules
    demand: DemandSpec
    background: BackgroundProfile   # congestion level already applied
    fleet_size: int
    horizon: int
    psi_c: float = 1.0
    feature_radius_km: float = 2.0
    t_ave_weight: str = "blended"   # density weight for T_ave: blended|background
    delta_min: float | None = None
    delta_max: float | None = None

    def __post_init__(self):
        if self.fleet_size <= 0:
            raise ConfigError("fleet_size must be positive")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.t_ave_weight not in ("blended", "background"):
            raise ConfigError("t_ave_weight must be 'blended' or 'background'")
        if self.demand.horizon != self.horizon:
            raise ConfigError("demand spec horizon != scenario horizon")


@dataclass
class EpisodeResult:
    scenario: str
    strategy: str
    seed: int
    profit: float
    revenue: float
    cost: float
    serviced: int
    fleet_km: float
    fleet_min: float
    awt_min: float | None
    rho: float | None
    t_ave: float | None
    delta_d_km: float
    m_single: int
    m_shared: int
    m_original: int
    m_cancel: int
    requests: int
    unpicked_at_horizon: int

    CSV_FIELDS = ("scenario strategy seed profit revenue cost serviced fleet_km "
                  "fleet_min awt_min rho t_ave delta_d_km m_single m_shared "
                  "m_original m_cancel requests unpicked_at_horizon").split()

    def to_row(self) -> list:
        row = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            row.append("" if v is None else v)
        return row

    @classmethod
    def from_row(cls, row: dict) -> "EpisodeResult":
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for name in cls.CSV_FIELDS:
            raw = row[name]
            if raw == "":
                kwargs[name] = None
            elif types[name] == "int" or name in ("seed", "serviced", "m_single",
                                                  "m_shared", "m_original", "m_cancel",
                                                  "requests", "unpicked_at_horizon"):
                kwargs[name] = int(raw)
            elif name in ("scenario", "strategy"):
                kwargs[name] = raw
            else:
                kwargs[name] = float(raw)
        return cls(**kwargs)


def compute_capacity(m_single: int, m_shared: int, m_original: int,
                     m_cancel: int) -> float | None:
    """Share of requests that yield any realized trip (service or original)."""
    total = m_single + m_shared + m_original + m_cancel
    if total == 0:
        return None
    return (m_single + m_shared + m_original) / total


def compute_congestion(weight_sum: float, weighted_time_sum: float) -> float | None:
    """Density-weighted mean per-km link travel time over the episode."""
    if weight_sum <= 0:
        return None
    return weighted_time_sum / weight_sum


def compute_awt(parties, horizon: float) -> tuple[float | None, int]:
    """(mean confirmation-to-pickup wait, count never picked up in-horizon).

    Parties first picked up at or after the horizon are excluded from the
    mean and reported in the second component.
    """
    waits = []
    unpicked = 0
    for p in parties:
        if p.pickup_time is not None and p.pickup_time < horizon:
            waits.append(p.pickup_time - p.confirm_time)
        else:
            unpicked += 1
    if not waits:
        return None, unpicked
    return float(np.mean(waits)), unpicked


def compute_sharing_efficiency(direct_km_sum: float, fleet_km: float) -> float:
    """Total direct trip distance minus total fleet distance (may be negative)."""
    return direct_km_sum - fleet_km


class Episode:
    """One running episode; exposed for tests that inspect internals."""

    def __init__(self, scenario: Scenario, strategy: Strategy, seed: int):
        self.scenario = scenario
        self.strategy = strategy
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        demand_seed, choice_seed, fleet_seed = ss.spawn(3)
        self.rng_demand = np.random.default_rng(demand_seed)
        self.rng_choice = np.random.default_rng(choice_seed)
        self.rng_fleet = np.random.default_rng(fleet_seed)

        self.net = build_grid(scenario.grid, scenario.fd)
        self.net.update(scenario.background.density_at(0), {}, scenario.blend)
        n_veh = 0 if strategy.kind == "none" else scenario.fleet_size
        nodes = self.rng_fleet.integers(0, scenario.grid.n_nodes, size=n_veh)
        self.vehicles = [Vehicle(id=i, node=int(nodes[i])) for i in range(n_veh)]
        self._veh_by_id = {v.id: v for v in self.vehicles}
        self.feature_index = FeatureIndex(scenario.grid, self.net,
                                          scenario.feature_radius_km)

        self.parties = []
        self.m_counts = {SINGLE: 0, SHARED: 0, ORIGINAL: 0, CANCEL: 0}
        self.revenue = 0.0
        self.request_count = 0
        self.kt_weight = 0.0
        self.kt_weighted_time = 0.0

    # -- one minute --------------------------------------------------------

    def step(self, t: int):
        self._accumulate_congestion()
        for req in sample_requests(self.scenario.demand, t, self.rng_demand,
                                   id_start=self.request_count):
            self.request_count += 1
            self._process_request(req, t)
        advance_vehicles(self.vehicles, self.net, t)
        nxt = min(t + 1, self.scenario.horizon - 1)
        self.net.update(self.scenario.background.density_at(nxt),
                        self._link_counts(), self.scenario.blend)

    def _accumulate_congestion(self):
        if self.scenario.t_ave_weight == "background":
            w = self.net.k_bg
        else:
            w = self.net.k_hat
        per_km_time = 60.0 / self.net.speed
        self.kt_weight += float(w.sum())
        self.kt_weighted_time += float((w * per_km_time).sum())

    def _link_counts(self) -> dict:
        counts: dict[int, int] = {}
        for veh in self.vehicles:
            if veh.link is not None:
                counts[veh.link] = counts.get(veh.link, 0) + 1
        return counts

    def _process_request(self, req, t: int):
        sc = self.scenario
        feasible = build_feasible_set(req, self.vehicles, self.net, t, sc.rules,
                                      sc.tariff)
        direct_min, direct_km = self.net.path_metrics(req.origin, req.destination)
        u_original, v0 = outside_utility(direct_min, sc.tariff.cost_per_km * direct_km,
                                         sc.choice_params)
        ctx = OfferContext(net=self.net, vehicles=self.vehicles, demand=sc.demand,
                           choice_params=sc.choice_params, rules=sc.rules, t=t,
                           radius_km=sc.feature_radius_km,
                           feature_index=self.feature_index,
                           delta_min=sc.delta_min, delta_max=sc.delta_max)
        offer = decide_offer(self.strategy, req, feasible, ctx, v0)

        utilities = [option_utility(opt.option_type, opt.fare, delta,
                                    opt.travel_time, sc.choice_params)
                     for opt, delta in offer]
        utilities += [u_original, 0.0]
        probs = choice_probabilities(utilities)
        pick = sample_choice(probs, self.rng_choice)

        if pick < len(offer):
            opt, delta = offer[pick]
            vehicle = self._veh_by_id[opt.vehicle_id]
            party = confirm_trip(vehicle, opt, delta, req, t, self.net, sc.rules)
            self.parties.append(party)
            self.m_counts[opt.option_type] += 1
            self.revenue += party.booked_fare
        elif pick == len(offer):
            self.m_counts[ORIGINAL] += 1
        else:
            self.m_counts[CANCEL] += 1

    # -- full run ----------------------------------------------------------

    def drain(self):
        """Finish in-progress trips after the horizon under frozen speeds."""
        t = float(self.scenario.horizon)
        cap = self.scenario.horizon * DRAIN_CAP_FACTOR + 1000
        while any(not v.idle for v in self.vehicles):
            advance_vehicles(self.vehicles, self.net, t)
            t += 1.0
            if t - self.scenario.horizon > cap:
                raise RuntimeError("episode drain did not terminate; stuck vehicle?")

    def result(self) -> EpisodeResult:
        sc = self.scenario
        fleet_km = sum(v.odometer_km for v in self.vehicles)
        fleet_min = sum(v.moving_min for v in self.vehicles)
        cost = sc.tariff.cost_per_km * fleet_km
        awt, unpicked = compute_awt(self.parties, sc.horizon)
        direct_sum = sum(p.booked_direct_km for p in self.parties)
        return EpisodeResult(
            scenario=sc.name,
            strategy=strategy_label(self.strategy),
            seed=self.seed,
            profit=self.revenue - cost,
            revenue=self.revenue,
            cost=cost,
            serviced=self.m_counts[SINGLE] + self.m_counts[SHARED],
            fleet_km=fleet_km,
            fleet_min=fleet_min,
            awt_min=awt,
            rho=compute_capacity(self.m_counts[SINGLE], self.m_counts[SHARED],
                                 self.m_counts[ORIGINAL], self.m_counts[CANCEL]),
            t_ave=compute_congestion(self.kt_weight, self.kt_weighted_time),
            delta_d_km=compute_sharing_efficiency(direct_sum, fleet_km),
            m_single=self.m_counts[SINGLE],
            m_shared=self.m_counts[SHARED],
            m_original=self.m_counts[ORIGINAL],
            m_cancel=self.m_counts[CANCEL],
            requests=self.request_count,
            unpicked_at_horizon=unpicked,
        )


def strategy_label(strategy: Strategy) -> str:
    return strategy.kind


def run_episode(scenario: Scenario, strategy: Strategy, seed: int,
                trip_log=None) -> EpisodeResult:
    """Simulate one day; optionally write a per-trip event log CSV."""
    ep = Episode(scenario, strategy, seed)
    for t in range(scenario.horizon):
        ep.step(t)
    ep.drain()
    if trip_log is not None:
        write_trip_log(ep.parties, trip_log)
    return ep.result()


TRIP_LOG_FIELDS = ("request_id option_type confirm_time pickup_time dropoff_time "
                   "booked_fare delta booked_cost booked_direct_km "
                   "booked_invehicle_km booked_dropoff_time").split()


def write_trip_log(parties, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIP_LOG_FIELDS)
        for p in parties:
            w.writerow([p.request_id, p.option_type, p.confirm_time, p.pickup_time,
                        p.dropoff_time, p.booked_fare, p.delta, p.booked_cost,
                        p.booked_direct_km, p.booked_invehicle_km,
                        p.booked_dropoff_time])


def write_results_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EpisodeResult.CSV_FIELDS)
        for r in results:
            w.writerow(r.to_row())


def read_results_csv(path) -> list[EpisodeResult]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EpisodeResult.CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"{path}: missing result columns {sorted(missing)}")
        for row in reader:
            out.append(EpisodeResult.from_row(row))
    return out
