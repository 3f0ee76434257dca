"""Traveler choice behavior: utilities, MNL probabilities, choice sampling.

Utilities are expressed in monetary units and scaled by a common factor.
Each request chooses among the offered options, staying with the original
travel mode, or cancelling the trip (utility fixed at zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SINGLE = "single"
SHARED = "shared"
ORIGINAL = "original"
CANCEL = "cancel"


@dataclass(frozen=True)
class ChoiceParams:
    mu: float = 0.5            # utility scale
    vot: float = 0.03          # value of time, $/min
    asc_single: float = 4.5
    asc_shared: float = 4.0
    asc_original: float = 5.0
    e1: float = 1.0            # discount sensitivity (delta < 0)
    e2: float = 2.0            # surge sensitivity (delta >= 0)
    b_time_shared: float = 1.2   # shared-service time reliability multiplier
    b_fare_original: float = 2.5  # original-mode cost factor

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mu must be positive")
        if not (self.e2 > self.e1 > 0):
            raise ConfigError("need e2 > e1 > 0")
        if self.b_time_shared < 1.0:
            raise ConfigError("b_time_shared must be >= 1")
        if self.vot < 0:
            raise ConfigError("vot must be non-negative")


def adjustment_disutility(delta: float, params: ChoiceParams) -> float:
    """Asymmetric perception of fare adjustments: e1*d below zero, e2*d above."""
    if delta < 0:
        return params.e1 * delta
    return params.e2 * delta


def option_utility(option_type: str, fare: float, delta: float, travel_time: float,
                   params: ChoiceParams) -> float:
    """Utility of a priced service offer."""
    e = adjustment_disutility(delta, params)
    if option_type == SINGLE:
        return params.mu * (params.asc_single - params.vot * travel_time - fare - e)
    if option_type == SHARED:
        return params.mu * (params.asc_shared
                            - params.b_time_shared * params.vot * travel_time - fare - e)
    raise ConfigError(f"unknown option type {option_type!r}")


def outside_utility(t_original: float, f_original: float,
                    params: ChoiceParams) -> tuple[float, float]:
    """Original-mode utility and the pooled rejection weight.

    Returns (U_original, V0) where V0 = exp(U_original) + exp(U_cancel)
    folds both non-service alternatives into the single rejection
    alternative used by the pricing problem; U_cancel is 0.
    """
    u_o = params.mu * (params.asc_original - params.vot * t_original
                       - params.b_fare_original * f_original)
    return u_o, math.exp(u_o) + 1.0


def choice_probabilities(utilities) -> np.ndarray:
    """MNL probabilities for a utility vector; guarded against overflow."""
    u = np.asarray(utilities, dtype=float)
    shifted = u - u.max()
    w = np.exp(shifted)
    return w / w.sum()


def sample_choice(probabilities, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; returns the chosen alternative's index."""
    p = np.asarray(probabilities, dtype=float)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(np.searchsorted(cdf, u, side="right").clip(0, len(p) - 1))
