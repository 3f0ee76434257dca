"""Request-level choice-based price optimization.

Given priced service options and an MNL rejection weight, find the fare
adjustments that maximize expected profit per request. The optimum is
characterized by a one-dimensional fixed point in the expected surplus z:
given z, every option's adjustment decouples into a closed-form scalar
maximization, and the Newton step on the resulting root equation is
exactly the expected-profit recursion. Iterates from z=0 increase
monotonically to the unique root.

Opportunity costs shift an option's margin (fare - cost - A); the realized
booked profit stays fare + delta - cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .choice import SINGLE, SHARED, ChoiceParams
from .errors import ConfigError, NonConvergenceError


@dataclass(frozen=True)
class PricingOption:
    option_type: str          # SINGLE or SHARED
    fare: float
    cost: float
    travel_time: float
    base_utility: float       # utility at delta = 0
    opportunity_cost: float = 0.0

    @property
    def margin(self) -> float:
        return self.fare - self.cost - self.opportunity_cost


@dataclass(frozen=True)
class PricingInstance:
    options: tuple[PricingOption, ...]
    v0: float                              # rejection weight exp(U_0)
    sens: dict                             # option type -> (e1, e2), post utility-scale
    delta_min: float | None = None         # optional adjustment bounds
    delta_max: float | None = None

    def __post_init__(self):
        if self.v0 <= 0:
            raise ConfigError("rejection weight V0 must be positive")
        for e1, e2 in self.sens.values():
            if not (e2 > e1 > 0):
                raise ConfigError("need e2 > e1 > 0 for every service type")

    def sensitivities(self, option_type: str) -> tuple[float, float]:
        return self.sens[option_type]


@dataclass(frozen=True)
class PricingSolution:
    deltas: tuple[float, ...]
    z: float
    iterations: int
    residual: float
    z_history: tuple[float, ...] = field(default=())


def scaled_sensitivities(params: ChoiceParams) -> dict:
    """Adjustment sensitivities in utility units (choice scale folded in)."""
    pair = (params.mu * params.e1, params.mu * params.e2)
    return {SINGLE: pair, SHARED: pair}


def _adjustment_weight(delta: float, e1: float, e2: float) -> float:
    """exp of the utility change caused by a fare adjustment."""
    if delta < 0:
        return math.exp(-e1 * delta)
    return math.exp(-e2 * delta)


def expected_profit(deltas, inst: PricingInstance) -> float:
    """Expected per-request profit at the given fare adjustments."""
    num = 0.0
    den = inst.v0
    for delta, opt in zip(deltas, inst.options):
        e1, e2 = inst.sensitivities(opt.option_type)
        w = math.exp(opt.base_utility) * _adjustment_weight(delta, e1, e2)
        num += w * (opt.margin + delta)
        den += w
    return num / den


def delta_update(z: float, inst: PricingInstance) -> tuple[float, ...]:
    """Per-option maximizers of exp(E(d)) * (margin - z + d) at surplus z."""
    deltas = []
    for opt in inst.options:
        e1, e2 = inst.sensitivities(opt.option_type)
        lo = z - opt.margin + 1.0 / e1
        hi = z - opt.margin + 1.0 / e2
        if lo < 0:
            d = lo
        elif hi > 0:
            d = hi
        else:
            d = 0.0
        if inst.delta_min is not None:
            d = max(d, inst.delta_min)
        if inst.delta_max is not None:
            d = min(d, inst.delta_max)
        deltas.append(d)
    return tuple(deltas)


def z_update(deltas, inst: PricingInstance) -> float:
    """Newton step in z; identical to the expected profit at these deltas."""
    return expected_profit(deltas, inst)


def verify_fixed_point(z: float, inst: PricingInstance) -> float:
    """Residual h(z) of the root equation; h is strictly decreasing in z."""
    best = 0.0
    deltas = delta_update(z, inst)
    for delta, opt in zip(deltas, inst.options):
        e1, e2 = inst.sensitivities(opt.option_type)
        w = math.exp(opt.base_utility) * _adjustment_weight(delta, e1, e2)
        best += w * (opt.margin - z + delta)
    return best - inst.v0 * z


def solve_pricing(inst: PricingInstance, tol: float = 1e-9,
                  max_iter: int = 200) -> PricingSolution:
    """Alternate delta and z updates from z=0 until the iterates settle."""
    if not inst.options:
        return PricingSolution(deltas=(), z=0.0, iterations=0, residual=0.0,
                               z_history=(0.0,))
    z = 0.0
    history = [z]
    for it in range(1, max_iter + 1):
        deltas = delta_update(z, inst)
        z_next = z_update(deltas, inst)
        history.append(z_next)
        if abs(z_next - z) <= tol:
            # one polish step so the returned pair is self-consistent
            deltas = delta_update(z_next, inst)
            z_final = z_update(deltas, inst)
            history.append(z_final)
            residual = abs(verify_fixed_point(z_final, inst))
            return PricingSolution(deltas=deltas, z=z_final, iterations=it,
                                   residual=residual, z_history=tuple(history))
        z = z_next
    raise NonConvergenceError(
        f"pricing iteration did not converge within {max_iter} steps",
        last_z=z, iterations=max_iter)
