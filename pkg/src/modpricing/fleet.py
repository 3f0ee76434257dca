"""Vehicle state, feasible-set construction, trip confirmation, movement.

A vehicle serves at most one single-service party, or up to three shared
parties. Offers are built from the current network snapshot: the single
candidate is the idle vehicle with the fastest pickup within the single
search radius, the shared candidate is the spare-capacity vehicle whose
cheapest feasible insertion adds the least driving distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .choice import SINGLE, SHARED
from .errors import ConfigError
from .network import NetworkState, shortest_path

IDLE = "idle"
PICKUP = "pickup"
DROPOFF = "dropoff"

_EPS = 1e-9


@dataclass(frozen=True)
class OperationRules:
    max_parties: int = 3
    single_pickup_km: float = 5.0
    shared_pickup_km: float = 2.0
    max_detour_km: float = 2.0
    max_detour_min: float = 5.0

    def __post_init__(self):
        if self.max_parties < 1:
            raise ConfigError("max_parties must be >= 1")


@dataclass(frozen=True)
class Tariff:
    base_fare: float = 1.0       # $ per trip
    per_km: float = 0.25         # $ per km
    per_min: float = 0.01        # $ per min
    shared_ratio: float = 0.6    # shared fare as a fraction of single fare
    cost_per_km: float = 0.07    # fuel cost, $ per km

    def __post_init__(self):
        if not (0 < self.shared_ratio < 1):
            raise ConfigError("shared_ratio must be in (0, 1)")

    def single_fare(self, direct_km: float, direct_min: float) -> float:
        return self.base_fare + self.per_km * direct_km + self.per_min * direct_min

    def shared_fare(self, direct_km: float, direct_min: float) -> float:
        return self.single_fare(direct_km, direct_min) * self.shared_ratio


@dataclass
class AssignedParty:
    request_id: int
    origin: int
    destination: int
    option_type: str
    confirm_time: float
    booked_fare: float           # fare + delta as priced
    delta: float
    booked_cost: float           # marginal cost used in pricing
    booked_direct_km: float      # direct OD distance at booking
    booked_dropoff_time: float   # estimate at booking, absolute minutes
    booked_invehicle_km: float   # estimate at booking
    pickup_time: float | None = None
    dropoff_time: float | None = None
    pickup_odometer: float | None = None

    @property
    def booked_profit(self) -> float:
        return self.booked_fare - self.booked_cost


@dataclass(frozen=True)
class Stop:
    node: int
    action: str        # PICKUP or DROPOFF
    request_id: int


@dataclass
class Vehicle:
    id: int
    node: int | None             # set while parked / between links
    link: int | None = None      # set while traversing a link
    frac: float = 0.0            # progress along the current link
    route_nodes: list = field(default_factory=list)   # remaining path to next stop
    stops: list = field(default_factory=list)         # ordered Stop sequence
    parties: dict = field(default_factory=dict)       # request_id -> AssignedParty
    service_type: str = IDLE
    odometer_km: float = 0.0
    moving_min: float = 0.0

    @property
    def idle(self) -> bool:
        return self.service_type == IDLE

    def spare_shared_capacity(self, rules: OperationRules) -> bool:
        if self.service_type == SINGLE:
            return False
        return len(self.parties) < rules.max_parties

    def anchor(self, net: NetworkState) -> tuple[int, float, float]:
        """(node, lead_min, lead_km) where the vehicle can next change course.

        Mid-link vehicles first finish the current link; parked vehicles
        answer from where they stand.
        """
        if self.link is None:
            return self.node, 0.0, 0.0
        remaining = net.link_length[self.link] * (1.0 - self.frac)
        lead_min = remaining / net.speed[self.link] * 60.0
        return int(net.link_to[self.link]), lead_min, remaining


@dataclass(frozen=True)
class TripOption:
    vehicle_id: int
    option_type: str
    fare: float
    cost: float                  # marginal cost of acceptance
    travel_time: float           # request -> estimated arrival, minutes
    est_pickup_time: float       # absolute minutes
    est_dropoff_time: float      # absolute minutes
    direct_km: float             # direct OD distance
    direct_min: float            # direct OD travel time
    detour_km: float
    detour_min: float
    est_invehicle_km: float
    added_km: float              # marginal vehicle distance
    stops: tuple = ()            # tentative full stop sequence


@dataclass(frozen=True)
class FeasibleSet:
    single: TripOption | None = None
    shared: TripOption | None = None

    def options(self) -> list[TripOption]:
        return [o for o in (self.single, self.shared) if o is not None]


def _route_schedule(net, anchor_node, lead_min, lead_km, stops, t_now):
    """Arrival time and cumulative distance at every stop, plus total distance."""
    cum_t, cum_d = lead_min, lead_km
    cur = anchor_node
    sched = []
    for s in stops:
        tt, dd = net.path_metrics(cur, s.node)
        cum_t += tt
        cum_d += dd
        sched.append((t_now + cum_t, cum_d))
        cur = s.node
    return sched, cum_d


def _party_plan(stops, sched):
    """Per request: (pickup idx or None if onboard, dropoff idx)."""
    plan = {}
    for i, s in enumerate(stops):
        pick, drop = plan.get(s.request_id, (None, None))
        if s.action == PICKUP:
            pick = i
        else:
            drop = i
        plan[s.request_id] = (pick, drop)
    return plan


def estimate_trip(vehicle: Vehicle, request, option_type: str, net: NetworkState,
                  t: float, tariff: Tariff, rules: OperationRules) -> TripOption | None:
    """Construct one candidate offer; None when the vehicle cannot serve it.

    Fares are rate-card values from the direct OD path on the current
    snapshot (identical base for both service types); the option's travel
    time is its own estimated arrival minus the request time.
    """
    if option_type == SINGLE:
        return _estimate_single(vehicle, request, net, t, tariff, rules)
    if option_type == SHARED:
        return _estimate_shared(vehicle, request, net, t, tariff, rules)
    raise ConfigError(f"unknown option type {option_type!r}")


def _estimate_single(vehicle, request, net, t, tariff, rules, pickup=None):
    if not vehicle.idle:
        return None
    pick_min, pick_km = pickup if pickup else net.path_metrics(vehicle.node, request.origin)
    if pick_km > rules.single_pickup_km + _EPS:
        return None
    direct_min, direct_km = net.path_metrics(request.origin, request.destination)
    stops = (Stop(request.origin, PICKUP, request.id),
             Stop(request.destination, DROPOFF, request.id))
    return TripOption(
        vehicle_id=vehicle.id,
        option_type=SINGLE,
        fare=tariff.single_fare(direct_km, direct_min),
        cost=tariff.cost_per_km * (pick_km + direct_km),
        travel_time=pick_min + direct_min,
        est_pickup_time=t + pick_min,
        est_dropoff_time=t + pick_min + direct_min,
        direct_km=direct_km,
        direct_min=direct_min,
        detour_km=0.0,
        detour_min=0.0,
        est_invehicle_km=direct_km,
        added_km=pick_km + direct_km,
        stops=stops,
    )


def _estimate_shared(vehicle, request, net, t, tariff, rules):
    if not vehicle.spare_shared_capacity(rules):
        return None
    anchor, lead_min, lead_km = vehicle.anchor(net)
    to_origin_min, to_origin_km = net.path_metrics(anchor, request.origin)
    if lead_km + to_origin_km > rules.shared_pickup_km + _EPS:
        return None

    direct_min, direct_km = net.path_metrics(request.origin, request.destination)
    # dedicated-ride baseline by this same vehicle
    base_min = lead_min + to_origin_min + direct_min

    if not vehicle.stops and not vehicle.parties:
        # empty vehicle starting a new pool: single feasible insertion
        return TripOption(
            vehicle_id=vehicle.id,
            option_type=SHARED,
            fare=tariff.shared_fare(direct_km, direct_min),
            cost=tariff.cost_per_km * (to_origin_km + direct_km),
            travel_time=base_min,
            est_pickup_time=t + lead_min + to_origin_min,
            est_dropoff_time=t + base_min,
            direct_km=direct_km,
            direct_min=direct_min,
            detour_km=0.0,
            detour_min=0.0,
            est_invehicle_km=direct_km,
            added_km=to_origin_km + direct_km,
            stops=(Stop(request.origin, PICKUP, request.id),
                   Stop(request.destination, DROPOFF, request.id)),
        )

    old = list(vehicle.stops)
    _, old_total_km = _route_schedule(net, anchor, lead_min, lead_km, old, t)
    pick_stop = Stop(request.origin, PICKUP, request.id)
    drop_stop = Stop(request.destination, DROPOFF, request.id)

    best = None
    for i in range(len(old) + 1):
        for j in range(i, len(old) + 1):
            stops = old[:i] + [pick_stop] + old[i:j] + [drop_stop] + old[j:]
            option = _evaluate_insertion(
                vehicle, request, stops, net, t, tariff, rules,
                anchor, lead_min, lead_km, old_total_km,
                direct_km, direct_min, base_min)
            if option is not None and (best is None or option.added_km < best.added_km - _EPS):
                best = option
    return best


def _evaluate_insertion(vehicle, request, stops, net, t, tariff, rules,
                        anchor, lead_min, lead_km, old_total_km,
                        direct_km, direct_min, base_min):
    sched, new_total_km = _route_schedule(net, anchor, lead_min, lead_km, stops, t)
    plan = _party_plan(stops, sched)

    pick_i, drop_i = plan[request.id]
    eta_pickup, d_at_pickup = sched[pick_i]
    eta_dropoff, d_at_dropoff = sched[drop_i]
    invehicle_km = d_at_dropoff - d_at_pickup
    detour_km = invehicle_km - direct_km
    detour_min = (eta_dropoff - t) - base_min
    if detour_km > rules.max_detour_km + _EPS or detour_min > rules.max_detour_min + _EPS:
        return None

    for rid, party in vehicle.parties.items():
        p_pick, p_drop = plan[rid]
        new_drop_time, d_drop = sched[p_drop]
        if p_pick is None:
            ridden = vehicle.odometer_km - party.pickup_odometer
            new_invehicle = ridden + d_drop
        else:
            new_invehicle = d_drop - sched[p_pick][1]
        if new_drop_time - party.booked_dropoff_time > rules.max_detour_min + _EPS:
            return None
        if new_invehicle - party.booked_invehicle_km > rules.max_detour_km + _EPS:
            return None

    return TripOption(
        vehicle_id=vehicle.id,
        option_type=SHARED,
        fare=tariff.shared_fare(direct_km, direct_min),
        cost=tariff.cost_per_km * (new_total_km - old_total_km),
        travel_time=eta_dropoff - t,
        est_pickup_time=eta_pickup,
        est_dropoff_time=eta_dropoff,
        direct_km=direct_km,
        direct_min=direct_min,
        detour_km=detour_km,
        detour_min=detour_min,
        est_invehicle_km=invehicle_km,
        added_km=new_total_km - old_total_km,
        stops=tuple(stops),
    )


def build_feasible_set(request, vehicles, net: NetworkState, t: float,
                       rules: OperationRules, tariff: Tariff) -> FeasibleSet:
    """At most one single and one shared offer under the operation rules."""
    time_to_origin, dist_to_origin, _ = net.to_target(request.origin)

    best_single = None
    best_key = None
    for veh in vehicles:
        if not veh.idle:
            continue
        if dist_to_origin[veh.node] > rules.single_pickup_km + _EPS:
            continue
        key = (time_to_origin[veh.node], veh.id)
        if best_key is None or key < best_key:
            best_key = key
            best_single = veh
    single = None
    if best_single is not None:
        single = _estimate_single(
            best_single, request, net, t, tariff, rules,
            pickup=(time_to_origin[best_single.node], dist_to_origin[best_single.node]))

    shared = None
    for veh in vehicles:
        if not veh.spare_shared_capacity(rules):
            continue
        anchor, _, lead_km = veh.anchor(net)
        if lead_km + dist_to_origin[anchor] > rules.shared_pickup_km + _EPS:
            continue
        cand = estimate_trip(veh, request, SHARED, net, t, tariff, rules)
        if cand is None:
            continue
        if shared is None or cand.added_km < shared.added_km - _EPS:
            shared = cand
    return FeasibleSet(single=single, shared=shared)


def confirm_trip(vehicle: Vehicle, option: TripOption, delta: float, request,
                 t: float, net: NetworkState, rules: OperationRules) -> AssignedParty:
    """Commit an accepted offer: adopt its route and book the party."""
    if option.vehicle_id != vehicle.id:
        raise ConfigError("option does not belong to this vehicle")
    party = AssignedParty(
        request_id=request.id,
        origin=request.origin,
        destination=request.destination,
        option_type=option.option_type,
        confirm_time=t,
        booked_fare=option.fare + delta,
        delta=delta,
        booked_cost=option.cost,
        booked_direct_km=option.direct_km,
        booked_dropoff_time=option.est_dropoff_time,
        booked_invehicle_km=option.est_invehicle_km,
    )
    vehicle.parties[request.id] = party
    vehicle.stops = list(option.stops)
    vehicle.route_nodes = []
    vehicle.service_type = option.option_type

    assert len(vehicle.parties) <= rules.max_parties
    assert not (option.option_type == SINGLE and len(vehicle.parties) > 1)
    assert option.detour_km <= rules.max_detour_km + 1e-6
    assert option.detour_min <= rules.max_detour_min + 1e-6
    return party


def advance_vehicles(vehicles, net: NetworkState, t: float, dt: float = 1.0):
    """Move every vehicle along its route for one time step.

    Pickups and dropoffs fire when their stop node is reached; a vehicle
    whose last party alights parks there and turns idle.
    """
    for veh in vehicles:
        _advance_one(veh, net, t, dt)


def _advance_one(veh: Vehicle, net: NetworkState, t: float, dt: float):
    budget = dt
    moved = False
    while budget > 1e-12:
        if veh.link is None:
            if not veh.stops:
                break
            nxt = veh.stops[0]
            if veh.node == nxt.node:
                _fire_stop(veh, nxt, t + (dt - budget))
                continue
            if not veh.route_nodes:
                path, _, _ = shortest_path(net, veh.node, nxt.node)
                veh.route_nodes = path[1:]
            step_node = veh.route_nodes[0]
            veh.link = net.link_index[(veh.node, step_node)]
            veh.frac = 0.0
            veh.node = None
        else:
            moved = True
            e = veh.link
            remaining_km = net.link_length[e] * (1.0 - veh.frac)
            need_min = remaining_km / net.speed[e] * 60.0
            if need_min <= budget:
                budget -= need_min
                veh.odometer_km += remaining_km
                veh.node = int(net.link_to[e])
                veh.link = None
                veh.frac = 0.0
                if veh.route_nodes and veh.route_nodes[0] == veh.node:
                    veh.route_nodes.pop(0)
            else:
                move_km = net.speed[e] / 60.0 * budget
                veh.frac += move_km / net.link_length[e]
                veh.odometer_km += move_km
                budget = 0.0
    if moved:
        veh.moving_min += dt - budget if budget > 1e-12 else dt


def vehicle_xy(veh: Vehicle, net: NetworkState) -> tuple[float, float]:
    """Planar position in km, interpolated along the current link if moving."""
    if veh.link is None:
        x, y = net.node_xy[veh.node]
        return float(x), float(y)
    a = net.node_xy[net.link_from[veh.link]]
    b = net.node_xy[net.link_to[veh.link]]
    p = a + (b - a) * veh.frac
    return float(p[0]), float(p[1])


def _fire_stop(veh: Vehicle, stop: Stop, when: float):
    party = veh.parties[stop.request_id]
    if stop.action == PICKUP:
        party.pickup_time = when
        party.pickup_odometer = veh.odometer_km
    else:
        party.dropoff_time = when
        del veh.parties[stop.request_id]
    veh.stops.pop(0)
    veh.route_nodes = []
    if not veh.stops and not veh.parties:
        veh.service_type = IDLE
