"""Mobility-on-demand fleet simulator with choice-based dynamic pricing."""

from .choice import ChoiceParams
from .demand import DemandShape, DemandSpec, Request, synth_demand
from .engine import EpisodeResult, Scenario, run_episode
from .errors import ConfigError, NonConvergenceError
from .fleet import OperationRules, Tariff
from .network import (BackgroundProfile, BlendParams, FlowDensityParams,
                      GridSpec, build_grid)
from .policy import PolicyParams, Strategy, make_strategy
from .presets import load_scenario
from .pricing import PricingInstance, PricingOption, solve_pricing
from .trainer import CmaConfig, evaluate_policy, train

__all__ = [
    "BackgroundProfile", "BlendParams", "ChoiceParams", "CmaConfig",
    "ConfigError", "DemandShape", "DemandSpec", "EpisodeResult",
    "FlowDensityParams", "GridSpec", "NonConvergenceError", "OperationRules",
    "PolicyParams", "PricingInstance", "PricingOption", "Request", "Scenario",
    "Strategy", "Tariff", "build_grid", "evaluate_policy", "load_scenario",
    "make_strategy", "run_episode", "solve_pricing", "synth_demand", "train",
]

__version__ = "0.1.0"
