"""Grid road network with triangular flow-density dynamics and routing.

The city is a rows x cols grid of nodes connected by directed links (both
directions of every edge). Link speeds come from a triangular flow-density
relation evaluated on a blended density that mixes background traffic with
the vehicles simulated here.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    link_length_km: float = 0.7

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ConfigError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if self.link_length_km <= 0:
            raise ConfigError("link_length_km must be positive")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def n_links(self) -> int:
        return 2 * (self.rows * (self.cols - 1) + self.cols * (self.rows - 1))

    def node_id(self, r: int, c: int) -> int:
        return r * self.cols + c

    def node_xy(self, node: int) -> tuple[float, float]:
        r, c = divmod(node, self.cols)
        return c * self.link_length_km, r * self.link_length_km


@dataclass(frozen=True)
class FlowDensityParams:
    v_max: float = 60.0     # free-flow speed, km/h
    k_free: float = 1.0     # free-flow density limit (rescaled units)
    k_jam: float = 6.0      # jam density limit
    v_floor: float = 2.0    # minimum speed, km/h; keeps jammed vehicles moving

    def __post_init__(self):
        if not (0 < self.k_free < self.k_jam):
            raise ConfigError("need 0 < k_free < k_jam")
        if not (self.v_max > self.v_floor > 0):
            raise ConfigError("need v_max > v_floor > 0")


@dataclass(frozen=True)
class BlendParams:
    exposure: float = 0.2   # market exposure share represented by the simulation
    k0: float = 0.95        # scale conversion for simulated vehicle counts

    def __post_init__(self):
        if not (0.0 <= self.exposure <= 1.0):
            raise ConfigError("exposure must be in [0, 1]")
        if self.k0 <= 0:
            raise ConfigError("k0 must be positive")


def fd_speed(k_hat, fd: FlowDensityParams):
    """Speed (km/h) from blended density via the triangular flow-density relation.

    Free branch below k_free returns v_max; the congested branch returns
    flow/density clamped below at v_floor. Accepts scalars or arrays.
    """
    k = np.asarray(k_hat, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        congested = fd.v_max * fd.k_free * (fd.k_jam - k) / ((fd.k_jam - fd.k_free) * k)
    speed = np.where(k < fd.k_free, fd.v_max, np.maximum(congested, fd.v_floor))
    if np.ndim(k_hat) == 0:
        return float(speed)
    return speed


def blend_density(k_background, k_sim, blend: BlendParams):
    """Combine background and simulated densities: (1 - phi) * k + k' / k0."""
    return (1.0 - blend.exposure) * np.asarray(k_background, dtype=float) + (
        np.asarray(k_sim, dtype=float) / blend.k0
    )


class NetworkState:
    """Mutable per-episode network state: one entry per directed link.

    Link arrays: ``k_sim`` (vehicle counts), ``k_bg`` (background density),
    ``k_hat`` (blended), ``speed`` (km/h) and ``travel_time`` (minutes).
    Shortest-path queries are answered on a frozen snapshot of the current
    travel times and cached until the next ``update`` call.
    """

    def __init__(self, grid: GridSpec, fd: FlowDensityParams):
        self.grid = grid
        self.fd = fd
        self._build_topology()
        n = self.n_links
        self.k_sim = np.zeros(n)
        self.k_bg = np.zeros(n)
        self.k_hat = np.zeros(n)
        self.speed = np.full(n, fd.v_max)
        self.travel_time = self.link_length / self.speed * 60.0
        self._tt_list = self.travel_time.tolist()
        self._len_list = self.link_length.tolist()
        self.version = 0
        self._fwd_cache: dict[int, tuple] = {}
        self._rev_cache: dict[int, tuple] = {}

    def _build_topology(self):
        g = self.grid
        links = []
        for r in range(g.rows):
            for c in range(g.cols):
                u = g.node_id(r, c)
                if c + 1 < g.cols:
                    links.append((u, g.node_id(r, c + 1)))
                    links.append((g.node_id(r, c + 1), u))
                if r + 1 < g.rows:
                    links.append((u, g.node_id(r + 1, c)))
                    links.append((g.node_id(r + 1, c), u))
        self.link_from = np.array([a for a, _ in links])
        self.link_to = np.array([b for _, b in links])
        self.n_links = len(links)
        self.link_length = np.full(self.n_links, g.link_length_km)
        self.node_xy = np.array([g.node_xy(v) for v in range(g.n_nodes)])
        self.link_mid_xy = 0.5 * (self.node_xy[self.link_from] + self.node_xy[self.link_to])
        self.out_links = [[] for _ in range(g.n_nodes)]
        self.in_links = [[] for _ in range(g.n_nodes)]
        for e, (a, b) in enumerate(links):
            self.out_links[a].append((b, e))
            self.in_links[b].append((a, e))
        self.link_index = {(a, b): e for e, (a, b) in enumerate(links)}

    # -- state update ------------------------------------------------------

    def update(self, background, vehicle_link_counts, blend: BlendParams):
        """Recompute densities, speeds and travel times for the next step.

        ``background`` is a per-link density vector (or scalar), and
        ``vehicle_link_counts`` maps link id -> number of moving vehicles
        currently on that link (anything else raises).
        """
        self.k_sim[:] = 0.0
        for link, count in vehicle_link_counts.items():
            if not 0 <= link < self.n_links:
                raise RuntimeError(f"unknown link id {link}")
            self.k_sim[link] = count
        self.k_bg[:] = background
        self.k_hat = blend_density(self.k_bg, self.k_sim, blend)
        self.speed = fd_speed(self.k_hat, self.fd)
        self.travel_time = self.link_length / self.speed * 60.0
        self._tt_list = self.travel_time.tolist()
        self._len_list = self.link_length.tolist()
        self.version += 1
        self._fwd_cache.clear()
        self._rev_cache.clear()
        return self

    # -- routing -----------------------------------------------------------

    def _dijkstra(self, source: int, adjacency) -> tuple[list, list, list]:
        n = self.grid.n_nodes
        tt = self._tt_list
        ll = self._len_list
        inf = float("inf")
        time = [inf] * n
        dist = [inf] * n
        parent = [-1] * n
        time[source] = 0.0
        dist[source] = 0.0
        heap = [(0.0, source)]
        push, pop = heapq.heappush, heapq.heappop
        while heap:
            t, u = pop(heap)
            if t > time[u]:
                continue
            du = dist[u]
            for v, e in adjacency[u]:
                nt = t + tt[e]
                if nt < time[v]:
                    time[v] = nt
                    dist[v] = du + ll[e]
                    parent[v] = u
                    push(heap, (nt, v))
        return time, dist, parent

    def from_source(self, source: int):
        """Cached one-to-all (time, dist, parent) on the current snapshot."""
        hit = self._fwd_cache.get(source)
        if hit is None:
            hit = self._dijkstra(source, self.out_links)
            self._fwd_cache[source] = hit
        return hit

    def to_target(self, target: int):
        """Cached all-to-one (time, dist, parent-in-reverse-graph)."""
        hit = self._rev_cache.get(target)
        if hit is None:
            hit = self._dijkstra(target, self.in_links)
            self._rev_cache[target] = hit
        return hit

    def path_metrics(self, origin: int, dest: int) -> tuple[float, float]:
        """(travel_time_min, distance_km) of the current shortest-time path."""
        if origin == dest:
            return 0.0, 0.0
        hit = self._fwd_cache.get(origin)
        if hit is None:
            hit = self.from_source(origin)
        return hit[0][dest], hit[1][dest]


def build_grid(spec: GridSpec, fd: FlowDensityParams) -> NetworkState:
    """Fresh network: empty of vehicles, zero background, free-flow speeds."""
    return NetworkState(spec, fd)


def shortest_path(state: NetworkState, origin: int, dest: int):
    """Minimum-travel-time path on the frozen snapshot.

    Returns (node path, travel_time_min, distance_km). Same origin and
    destination yield an empty path with zero time and distance.
    """
    if origin == dest:
        return [], 0.0, 0.0
    time, dist, parent = state.from_source(origin)
    path = [dest]
    u = dest
    while u != origin:
        u = int(parent[u])
        path.append(u)
    path.reverse()
    return path, float(time[dest]), float(dist[dest])


def update_network(state: NetworkState, background, vehicle_link_counts,
                   blend: BlendParams, fd: FlowDensityParams | None = None) -> NetworkState:
    """Module-level wrapper around :meth:`NetworkState.update`."""
    return state.update(background, vehicle_link_counts, blend)


class BackgroundProfile:
    """Per-link background density over time with nearest-earlier fill.

    Stored as a step function: sorted breakpoint times and a matrix of
    per-link densities, one row per breakpoint. Queries before the first
    breakpoint return zeros.
    """

    def __init__(self, times, values, n_links: int):
        times = np.asarray(times, dtype=int)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = np.repeat(values[:, None], n_links, axis=1)
        if values.shape != (len(times), n_links):
            raise ConfigError("background profile shape mismatch")
        if np.any(values < 0):
            raise ConfigError("background densities must be non-negative")
        order = np.argsort(times)
        self.times = times[order]
        self.values = values[order]
        self.n_links = n_links

    @classmethod
    def uniform(cls, level: float, n_links: int) -> "BackgroundProfile":
        return cls([0], np.array([[level] * n_links]), n_links)

    def density_at(self, t: int) -> np.ndarray:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i < 0:
            return np.zeros(self.n_links)
        return self.values[i]

    def scaled(self, factor: float) -> "BackgroundProfile":
        return BackgroundProfile(self.times.copy(), self.values * factor, self.n_links)

    # -- tabular text format: header then "time_step link_id density" rows --

    def save(self, path):
        with open(path, "w") as fh:
            fh.write("# background density profile\n")
            fh.write("time_step\tlink_id\tdensity\n")
            for i, t in enumerate(self.times):
                for e in range(self.n_links):
                    fh.write(f"{t}\t{e}\t{self.values[i, e]:.9g}\n")

    @classmethod
    def load(cls, path, n_links: int) -> "BackgroundProfile":
        records: dict[int, dict[int, float]] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("time_step"):
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ConfigError(f"{path}:{lineno}: expected 'time link density'")
                t, e, v = int(parts[0]), int(parts[1]), float(parts[2])
                if not 0 <= e < n_links:
                    raise ConfigError(f"{path}:{lineno}: link id {e} out of range")
                if v < 0:
                    raise ConfigError(f"{path}:{lineno}: negative density")
                records.setdefault(t, {})[e] = v
        if not records:
            raise ConfigError(f"{path}: empty background profile")
        times = sorted(records)
        values = np.zeros((len(times), n_links))
        # missing (t, link) entries carry the nearest earlier value forward
        for i, t in enumerate(times):
            if i > 0:
                values[i] = values[i - 1]
            for e, v in records[t].items():
                values[i, e] = v
        return cls(times, values, n_links)
