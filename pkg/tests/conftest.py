import numpy as np
import pytest

from modpricing.choice import ChoiceParams
from modpricing.demand import DemandPeak, DemandShape, synth_demand
from modpricing.engine import Scenario
from modpricing.fleet import OperationRules, Tariff
from modpricing.network import (BackgroundProfile, BlendParams,
                                FlowDensityParams, GridSpec)
from modpricing.presets import load_scenario


@pytest.fixture(scope="session")
def desk_scenario():
    return load_scenario("desk")


def make_mini_scenario(fleet_size=6, total_requests=300, horizon=120,
                       background=2.0, psi_c=1.0, seed_shape=None):
    """Small scenario for fast engine-level tests."""
    grid = GridSpec(rows=4, cols=4, link_length_km=0.7)
    shape = seed_shape or DemandShape(peaks=[
        DemandPeak(center=5, spread_km=0.9, dest_center=10, dest_spread_km=1.0,
                   time_weights=(2.0, 1.0), weight=1.0),
        DemandPeak(center=None, time_weights=(1.0, 1.0), weight=0.5),
    ])
    demand = synth_demand(shape, grid, total_requests, horizon)
    profile = BackgroundProfile.uniform(background * psi_c, grid.n_links)
    return Scenario(
        name="mini",
        grid=grid,
        fd=FlowDensityParams(),
        blend=BlendParams(exposure=0.2, k0=0.95),
        tariff=Tariff(),
        choice_params=ChoiceParams(),
        rules=OperationRules(),
        demand=demand,
        background=profile,
        fleet_size=fleet_size,
        horizon=horizon,
        psi_c=psi_c,
    )


@pytest.fixture()
def mini_scenario():
    return make_mini_scenario()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
