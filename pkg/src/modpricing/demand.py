"""Trip-request generation from a known OD-intensity model.

Demand is a mixture of components; each component factorizes into an OD
distribution and a time-of-day profile, so arbitrary spatio-temporal
patterns can be expressed as a sum of separable peaks. Requests arrive as
independent Poisson counts per (origin, destination, minute) cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .network import GridSpec

CONGESTION_FACTORS = {"low": 0.8, "medium": 1.0, "high": 1.2}


@dataclass(frozen=True)
class Request:
    id: int
    origin: int
    destination: int
    time: int

    def __post_init__(self):
        if self.origin == self.destination:
            raise ConfigError("request origin and destination must differ")


@dataclass
class DemandComponent:
    """One separable demand peak: lam(o,d,t) = mass * od_weights * time_profile."""

    origins: np.ndarray        # (K,) origin node per OD pair
    dests: np.ndarray          # (K,)
    od_weights: np.ndarray     # (K,) sums to 1
    time_profile: np.ndarray   # (horizon,) sums to 1
    mass: float                # expected total requests from this component

    def rates_at(self, t: int) -> np.ndarray:
        return self.mass * self.time_profile[t] * self.od_weights


class DemandSpec:
    """Known OD intensities over a horizon, queried per minute step."""

    def __init__(self, components: list[DemandComponent], horizon: int, n_nodes: int):
        if not components:
            raise ConfigError("demand spec needs at least one component")
        for comp in components:
            if len(comp.time_profile) != horizon:
                raise ConfigError("component time profile length != horizon")
            if np.any(comp.od_weights < 0) or np.any(comp.time_profile < 0):
                raise ConfigError("demand intensities must be non-negative")
            if np.any(comp.origins == comp.dests):
                raise ConfigError("demand OD pairs must have origin != destination")
        self.components = components
        self.horizon = horizon
        self.n_nodes = n_nodes
        self._outflow_cache: tuple[int, np.ndarray] | None = None

    @property
    def total_expected(self) -> float:
        return float(sum(c.mass for c in self.components))

    def rates_at(self, t: int):
        """Concatenated (origins, dests, rates) arrays for step t."""
        os = np.concatenate([c.origins for c in self.components])
        ds = np.concatenate([c.dests for c in self.components])
        lam = np.concatenate([c.rates_at(t) for c in self.components])
        return os, ds, lam

    def outflow_at(self, t: int) -> np.ndarray:
        """Total outflow intensity per node at step t (requests per minute)."""
        if self._outflow_cache is not None and self._outflow_cache[0] == t:
            return self._outflow_cache[1]
        out = np.zeros(self.n_nodes)
        for c in self.components:
            np.add.at(out, c.origins, c.rates_at(t))
        self._outflow_cache = (t, out)
        return out

    # -- tabular text format: "t origin destination lambda" -----------------

    def save(self, path):
        with open(path, "w") as fh:
            fh.write("# demand spec\n")
            fh.write(f"# horizon={self.horizon} n_nodes={self.n_nodes}\n")
            fh.write("t\torigin\tdestination\tlambda\n")
            for t in range(self.horizon):
                os, ds, lam = self.rates_at(t)
                for o, d, v in zip(os, ds, lam):
                    if v > 0:
                        fh.write(f"{t}\t{o}\t{d}\t{v:.12g}\n")

    @classmethod
    def load(cls, path, horizon: int, n_nodes: int) -> "DemandSpec":
        """Load a tabular spec; each occupied step becomes one component."""
        per_step: dict[int, dict[tuple[int, int], float]] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("t\t"):
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ConfigError(f"{path}:{lineno}: expected 't o d lambda'")
                t, o, d, v = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
                if not 0 <= t < horizon:
                    raise ConfigError(f"{path}:{lineno}: time step {t} out of range")
                if o == d:
                    raise ConfigError(f"{path}:{lineno}: origin == destination")
                if v < 0:
                    raise ConfigError(f"{path}:{lineno}: negative intensity")
                per_step.setdefault(t, {})[(o, d)] = per_step.get(t, {}).get((o, d), 0.0) + v
        components = []
        for t, cells in sorted(per_step.items()):
            pairs = sorted(cells)
            lam = np.array([cells[p] for p in pairs])
            total = lam.sum()
            if total <= 0:
                continue
            profile = np.zeros(horizon)
            profile[t] = 1.0
            components.append(DemandComponent(
                origins=np.array([p[0] for p in pairs]),
                dests=np.array([p[1] for p in pairs]),
                od_weights=lam / total,
                time_profile=profile,
                mass=float(total),
            ))
        return cls(components, horizon, n_nodes)


@dataclass
class DemandPeak:
    """Synthetic peak: Gaussian origin (and optional destination) pattern.

    ``center=None`` gives a spatially uniform pattern. ``time_weights`` is a
    coarse profile stretched over the horizon as a step function.
    """

    center: int | None = None
    spread_km: float = 1.0
    time_weights: tuple = (1.0,)
    dest_center: int | None = None
    dest_spread_km: float | None = None
    weight: float = 1.0


@dataclass
class DemandShape:
    peaks: list[DemandPeak] = field(default_factory=list)


def _node_weights(grid: GridSpec, center: int | None, spread_km: float) -> np.ndarray:
    n = grid.n_nodes
    if center is None:
        return np.full(n, 1.0 / n)
    xy = np.array([grid.node_xy(v) for v in range(n)])
    cx, cy = grid.node_xy(center)
    d2 = (xy[:, 0] - cx) ** 2 + (xy[:, 1] - cy) ** 2
    w = np.exp(-d2 / (2.0 * spread_km ** 2))
    return w / w.sum()


def _stretch_profile(weights, horizon: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ConfigError("time weights must be non-negative with positive sum")
    idx = np.minimum((np.arange(horizon) * len(w)) // horizon, len(w) - 1)
    profile = w[idx]
    return profile / profile.sum()


def synth_demand(shape: DemandShape, grid: GridSpec, total_requests: float,
                 horizon: int) -> DemandSpec:
    """Build a DemandSpec whose intensities sum to ``total_requests``."""
    if not shape.peaks:
        raise ConfigError("demand shape has no peaks")
    if total_requests <= 0:
        raise ConfigError("total_requests must be positive")
    masses = np.array([p.weight for p in shape.peaks], dtype=float)
    if np.any(masses < 0) or masses.sum() <= 0:
        raise ConfigError("peak weights must be non-negative with positive sum")
    masses = masses / masses.sum() * total_requests

    n = grid.n_nodes
    components = []
    for peak, mass in zip(shape.peaks, masses):
        ow = _node_weights(grid, peak.center, peak.spread_km)
        dw = _node_weights(grid, peak.dest_center,
                           peak.dest_spread_km if peak.dest_spread_km else peak.spread_km)
        w = np.outer(ow, dw)
        np.fill_diagonal(w, 0.0)   # no zero-length trips
        w = w / w.sum()
        flat = w.ravel()
        keep = flat > 0
        pairs = np.nonzero(keep)[0]
        components.append(DemandComponent(
            origins=pairs // n,
            dests=pairs % n,
            od_weights=flat[keep],
            time_profile=_stretch_profile(peak.time_weights, horizon),
            mass=float(mass),
        ))
    return DemandSpec(components, horizon, n)


def sample_requests(spec: DemandSpec, t: int, rng: np.random.Generator,
                    id_start: int = 0) -> list[Request]:
    """Poisson draw per OD cell at step t; returns requests in random order."""
    os, ds, lam = spec.rates_at(t)
    counts = rng.poisson(lam)
    total = int(counts.sum())
    if total == 0:
        return []
    origins = np.repeat(os, counts)
    dests = np.repeat(ds, counts)
    order = rng.permutation(total)
    return [Request(id=id_start + i, origin=int(origins[j]), destination=int(dests[j]), time=t)
            for i, j in enumerate(order)]


def local_demand_intensity(spec: DemandSpec, node: int, t: int, radius_km: float,
                           grid: GridSpec) -> float:
    """Mean outflow intensity over nodes within ``radius_km`` of ``node``."""
    nbrs = nodes_within(grid, node, radius_km)
    out = spec.outflow_at(t)
    return float(out[nbrs].mean())


def nodes_within(grid: GridSpec, node: int, radius_km: float) -> np.ndarray:
    xy = np.array([grid.node_xy(v) for v in range(grid.n_nodes)])
    cx, cy = grid.node_xy(node)
    d = np.hypot(xy[:, 0] - cx, xy[:, 1] - cy)
    return np.nonzero(d <= radius_km + 1e-12)[0]


def scale_background(profile, psi_c):
    """Scale every background density by a congestion-level factor.

    ``psi_c`` can be 'low' / 'medium' / 'high' or an explicit factor.
    """
    if isinstance(psi_c, str):
        key = psi_c.lower()
        if key not in CONGESTION_FACTORS:
            raise ConfigError(f"unknown congestion level {psi_c!r}")
        factor = CONGESTION_FACTORS[key]
    else:
        factor = float(psi_c)
        if factor < 0:
            raise ConfigError("congestion factor must be non-negative")
    return profile.scaled(factor)
