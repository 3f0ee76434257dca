"""Independent reference implementations used to cross-check the solvers.

These deliberately avoid the fixed-point/Newton machinery: the pricing
oracle maximizes the expected-profit objective directly by dense grid
search plus golden-section polish, and the routing oracle enumerates every
simple path.
"""

import math

import numpy as np

GOLDEN = (np.sqrt(5) - 1) / 2


def profit_scalar(deltas, inst):
    """Expected profit evaluated directly from the objective definition."""
    num, den = 0.0, inst.v0
    for d, opt in zip(deltas, inst.options):
        e1, e2 = inst.sensitivities(opt.option_type)
        energy = -e1 * d if d < 0 else -e2 * d
        w = math.exp(opt.base_utility + energy)
        num += w * (opt.margin + d)
        den += w
    return num / den


def profit_on_grid(deltas_per_option, inst):
    """Vectorized expected profit over an outer product of delta grids."""
    n = len(inst.options)
    nums, dens = [], []
    for grid, opt in zip(deltas_per_option, inst.options):
        e1, e2 = inst.sensitivities(opt.option_type)
        energy = np.where(grid < 0, -e1 * grid, -e2 * grid)
        w = np.exp(opt.base_utility) * np.exp(energy)
        nums.append(w * (opt.margin + grid))
        dens.append(w)
    if n == 1:
        return nums[0] / (dens[0] + inst.v0)
    if n == 2:
        num = nums[0][:, None] + nums[1][None, :]
        den = dens[0][:, None] + dens[1][None, :] + inst.v0
        return num / den
    raise NotImplementedError("oracle supports n <= 2")


def _golden_1d(f, lo, hi, iters=80):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def brute_force_pricing(inst, lo=-10.0, hi=10.0, fine_step=1e-3):
    """Grid search over the adjustment box with golden-section refinement.

    n=1 scans the full box at ``fine_step``; n=2 scans a 0.02 grid, then a
    ``fine_step`` grid around the best cell, then golden-section sweeps per
    coordinate. Returns (z_best, deltas_best).
    """
    n = len(inst.options)
    if n == 0:
        return 0.0, ()

    if n == 1:
        grid = np.arange(lo, hi + fine_step / 2, fine_step)
        vals = profit_on_grid([grid], inst)
        best = [float(grid[int(np.argmax(vals))])]
    else:
        coarse = np.arange(lo, hi + 0.01, 0.02)
        vals = profit_on_grid([coarse, coarse], inst)
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        best = [float(coarse[i]), float(coarse[j])]
        for _ in range(2):
            for k in range(2):
                local = np.arange(max(lo, best[k] - 0.03),
                                  min(hi, best[k] + 0.03) + fine_step / 2, fine_step)
                grids = [np.array([best[0]]), np.array([best[1]])]
                grids[k] = local
                vals = profit_on_grid(grids, inst)
                best[k] = float(local[int(np.argmax(vals))])

    for _ in range(3):
        for k in range(n):
            def f(x, k=k):
                d = list(best)
                d[k] = x
                return profit_scalar(d, inst)
            best[k], _ = _golden_1d(f, max(lo, best[k] - 2e-3), min(hi, best[k] + 2e-3))
    return profit_scalar(best, inst), tuple(best)


def random_instance(rng, n=None, with_opportunity=True):
    """Randomized pricing instance matching the documented test ranges."""
    from modpricing.pricing import PricingInstance, PricingOption

    n = n if n is not None else int(rng.integers(1, 3))
    options = []
    for _ in range(n):
        fare = rng.uniform(0.5, 5.0)
        cost = rng.uniform(0.0, fare)
        a = rng.uniform(-2.0, 2.0) if with_opportunity else 0.0
        options.append(PricingOption(
            option_type="single" if rng.random() < 0.5 else "shared",
            fare=fare,
            cost=cost,
            travel_time=rng.uniform(2.0, 30.0),
            base_utility=rng.uniform(-1.0, 2.0),
            opportunity_cost=a,
        ))
    e1 = rng.uniform(0.3, 1.5)
    e2 = e1 + rng.uniform(0.2, 2.0)
    sens = {"single": (e1, e2), "shared": (e1, e2)}
    return PricingInstance(options=tuple(options), v0=rng.uniform(0.5, 20.0), sens=sens)


def enumerate_simple_paths(out_links, origin, dest):
    """All simple node paths origin -> dest; for small grids only."""
    paths = []
    stack = [(origin, [origin], {origin})]
    while stack:
        node, path, seen = stack.pop()
        if node == dest:
            paths.append(path)
            continue
        for nxt, _ in out_links[node]:
            if nxt not in seen:
                stack.append((nxt, path + [nxt], seen | {nxt}))
    return paths


def path_time_distance(net, path):
    t = d = 0.0
    for a, b in zip(path, path[1:]):
        e = net.link_index[(a, b)]
        t += net.travel_time[e]
        d += net.link_length[e]
    return t, d


def best_path_by_enumeration(net, origin, dest):
    """Minimum-travel-time (time, distance) over all simple paths."""
    if origin == dest:
        return 0.0, 0.0
    best_t, best_d = np.inf, np.inf
    for path in enumerate_simple_paths(net.out_links, origin, dest):
        t, d = path_time_distance(net, path)
        if t < best_t - 1e-12:
            best_t, best_d = t, d
    return best_t, best_d


def enumerate_insertions(stops, pick, drop):
    """Every stop sequence that inserts pick before drop, preserving order."""
    out = []
    for i in range(len(stops) + 1):
        for j in range(i, len(stops) + 1):
            out.append(stops[:i] + [pick] + stops[i:j] + [drop] + stops[j:])
    return out


def schedule_by_recomputation(net, start_node, lead_min, lead_km, stops, t_now):
    """Straightforward cumulative schedule; mirrors no solver internals."""
    rows = []
    cum_t, cum_d = lead_min, lead_km
    cur = start_node
    for s in stops:
        tt, dd = net.path_metrics(cur, s.node)
        cum_t, cum_d = cum_t + tt, cum_d + dd
        rows.append((t_now + cum_t, cum_d))
        cur = s.node
    return rows, cum_d
