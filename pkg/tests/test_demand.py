import numpy as np
import pytest

from modpricing.demand import (DemandComponent, DemandPeak, DemandShape,
                               DemandSpec, local_demand_intensity,
                               sample_requests, scale_background, synth_demand)
from modpricing.errors import ConfigError
from modpricing.network import BackgroundProfile, GridSpec

GRID = GridSpec(3, 3, link_length_km=1.0)


def uniform_spec(total=1440.0, horizon=1440):
    shape = DemandShape(peaks=[DemandPeak(center=None, time_weights=(1.0,))])
    return synth_demand(shape, GRID, total, horizon)


def total_intensity_at(spec, t):
    _, _, lam = spec.rates_at(t)
    return float(lam.sum())


def test_uniform_shape_step_totals():
    spec = uniform_spec()
    assert total_intensity_at(spec, 0) == pytest.approx(1.0)
    assert total_intensity_at(spec, 720) == pytest.approx(1.0)


def test_total_normalization():
    for shape in [
        DemandShape(peaks=[DemandPeak(center=4, spread_km=0.5, time_weights=(1, 3, 2))]),
        DemandShape(peaks=[DemandPeak(center=0, time_weights=(2, 1)),
                           DemandPeak(center=None, weight=0.3)]),
    ]:
        spec = synth_demand(shape, GRID, 5000.0, 240)
        total = sum(total_intensity_at(spec, t) for t in range(240))
        assert total == pytest.approx(5000.0, rel=1e-6)


def test_two_peak_time_ratio():
    shape = DemandShape(peaks=[DemandPeak(center=None, time_weights=(2.0, 1.0))])
    spec = synth_demand(shape, GRID, 300.0, 100)
    early = total_intensity_at(spec, 10)
    late = total_intensity_at(spec, 90)
    assert early / late == pytest.approx(2.0)


def test_no_self_trips_and_validation():
    spec = uniform_spec(100, 10)
    for comp in spec.components:
        assert np.all(comp.origins != comp.dests)
    with pytest.raises(ConfigError):
        synth_demand(DemandShape(peaks=[]), GRID, 100, 10)
    with pytest.raises(ConfigError):
        synth_demand(DemandShape(peaks=[DemandPeak()]), GRID, 0.0, 10)


def test_sample_requests_zero_intensity():
    shape = DemandShape(peaks=[DemandPeak(center=None, time_weights=(1.0, 0.0))])
    spec = synth_demand(shape, GRID, 10.0, 10)
    rng = np.random.default_rng(0)
    assert sample_requests(spec, 9, rng) == []   # second half has zero weight


def test_sample_requests_poisson_mean():
    # single OD pair with lambda = 3 per step
    comp = DemandComponent(origins=np.array([0]), dests=np.array([1]),
                           od_weights=np.array([1.0]),
                           time_profile=np.full(10, 0.1), mass=30.0)
    spec = DemandSpec([comp], horizon=10, n_nodes=9)
    rng = np.random.default_rng(42)
    counts = [len(sample_requests(spec, 0, rng)) for _ in range(10_000)]
    assert np.mean(counts) == pytest.approx(3.0, abs=0.1)


def test_sample_requests_deterministic():
    spec = uniform_spec(500, 50)
    a = sample_requests(spec, 3, np.random.default_rng(7))
    b = sample_requests(spec, 3, np.random.default_rng(7))
    assert a == b
    for req in a:
        assert req.time == 3
        assert req.origin != req.destination


def test_episode_total_matches_scale():
    spec = uniform_spec(200.0, 60)
    totals = []
    for seed in range(30):
        rng = np.random.default_rng(seed)
        totals.append(sum(len(sample_requests(spec, t, rng)) for t in range(60)))
    se = np.sqrt(200.0 / 30)
    assert np.mean(totals) == pytest.approx(200.0, abs=3 * se)


def test_local_demand_intensity_cases():
    zero = synth_demand(
        DemandShape(peaks=[DemandPeak(center=None, time_weights=(1.0, 0.0))]),
        GRID, 10, 10)
    assert local_demand_intensity(zero, 4, 9, 2.0, GRID) == 0.0

    uni = uniform_spec(900, 100)
    vals = [local_demand_intensity(uni, v, 0, 1.0, GRID) for v in range(9)]
    # uniform OD intensities: every node has the same outflow
    assert max(vals) == pytest.approx(min(vals))

    hot = DemandSpec([DemandComponent(
        origins=np.array([4]), dests=np.array([5]), od_weights=np.array([1.0]),
        time_profile=np.array([1.0]), mass=5.0)], horizon=1, n_nodes=9)
    # radius 1.0 around the center covers 5 nodes; only the center emits
    assert local_demand_intensity(hot, 4, 0, 1.0, GRID) == pytest.approx(1.0)


def test_local_demand_depends_only_on_outflow():
    comp_a = DemandComponent(origins=np.array([4, 4]), dests=np.array([1, 7]),
                             od_weights=np.array([0.5, 0.5]),
                             time_profile=np.array([1.0]), mass=6.0)
    comp_b = DemandComponent(origins=np.array([4, 4]), dests=np.array([3, 8]),
                             od_weights=np.array([0.25, 0.75]),
                             time_profile=np.array([1.0]), mass=6.0)
    a = DemandSpec([comp_a], 1, 9)
    b = DemandSpec([comp_b], 1, 9)
    assert (local_demand_intensity(a, 4, 0, 1.5, GRID)
            == pytest.approx(local_demand_intensity(b, 4, 0, 1.5, GRID)))


def test_scale_background():
    profile = BackgroundProfile.uniform(2.5, 4)
    assert np.allclose(scale_background(profile, "medium").density_at(0), 2.5)
    assert np.allclose(scale_background(profile, "low").density_at(0), 2.0)
    zero = BackgroundProfile.uniform(0.0, 4)
    assert np.allclose(scale_background(zero, "high").density_at(0), 0.0)
    assert np.allclose(scale_background(profile, 1.2).density_at(0), 3.0)
    with pytest.raises(ConfigError):
        scale_background(profile, "extreme")


def test_demand_spec_roundtrip(tmp_path):
    shape = DemandShape(peaks=[
        DemandPeak(center=4, spread_km=0.8, dest_center=0, time_weights=(2.0, 1.0)),
        DemandPeak(center=None, weight=0.5),
    ])
    spec = synth_demand(shape, GRID, 120.0, 6)
    path = tmp_path / "demand.tsv"
    spec.save(path)
    loaded = DemandSpec.load(path, horizon=6, n_nodes=9)
    assert loaded.total_expected == pytest.approx(spec.total_expected, rel=1e-9)
    for t in range(6):
        assert loaded.outflow_at(t) == pytest.approx(spec.outflow_at(t), rel=1e-9)


def test_demand_spec_load_rejects_bad_rows(tmp_path):
    path = tmp_path / "demand.tsv"
    path.write_text("0\t1\t1\t2.0\n")
    with pytest.raises(ConfigError):
        DemandSpec.load(path, horizon=6, n_nodes=9)
    path.write_text("0\t1\t2\t-2.0\n")
    with pytest.raises(ConfigError):
        DemandSpec.load(path, horizon=6, n_nodes=9)
