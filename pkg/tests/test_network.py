import numpy as np
import pytest

from modpricing.errors import ConfigError
from modpricing.network import (BackgroundProfile, BlendParams,
                                FlowDensityParams, GridSpec, blend_density,
                                build_grid, fd_speed, shortest_path,
                                update_network)
from oracles import best_path_by_enumeration

FD = FlowDensityParams(v_max=60.0, k_free=1.0, k_jam=6.0, v_floor=2.0)


def test_grid_link_counts():
    assert build_grid(GridSpec(3, 3), FD).n_links == 24
    assert build_grid(GridSpec(10, 10), FD).n_links == 2 * (10 * 9 + 10 * 9)
    net = build_grid(GridSpec(2, 2), FD)
    assert net.n_links == 8
    assert np.all(net.speed == 60.0)
    assert np.all(net.k_sim == 0.0)


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec(1, 5)
    with pytest.raises(ConfigError):
        GridSpec(3, 3, link_length_km=0.0)
    with pytest.raises(ConfigError):
        FlowDensityParams(k_free=6.0, k_jam=6.0)


def test_fd_speed_branches():
    assert fd_speed(0.5, FD) == 60.0
    assert fd_speed(3.5, FD) == pytest.approx(60 * 1 * (6 - 3.5) / ((6 - 1) * 3.5))
    assert fd_speed(3.5, FD) == pytest.approx(8.5714, abs=1e-4)
    assert fd_speed(6.0, FD) == FD.v_floor
    assert fd_speed(8.0, FD) == FD.v_floor


def test_fd_speed_continuous_and_monotone():
    eps = 1e-9
    assert fd_speed(FD.k_free - eps, FD) == pytest.approx(fd_speed(FD.k_free + eps, FD),
                                                          abs=1e-5)
    ks = np.linspace(0, 8, 400)
    speeds = fd_speed(ks, FD)
    assert np.all(np.diff(speeds) <= 1e-12)
    assert np.all(speeds >= FD.v_floor)
    assert np.all(speeds <= FD.v_max)


def test_blend_density_values():
    assert blend_density(2.0, 0.0, BlendParams(exposure=1.0, k0=0.8)) == 0.0
    assert blend_density(2.0, 0.8, BlendParams(exposure=0.4, k0=0.8)) == pytest.approx(2.2)
    assert blend_density(2.0, 0.0, BlendParams(exposure=0.0, k0=0.8)) == 2.0


def test_blend_density_linear():
    b = BlendParams(exposure=0.3, k0=0.9)
    rng = np.random.default_rng(0)
    for _ in range(20):
        k, ks, a = rng.uniform(0, 5, 3)
        lhs = blend_density(a * k, a * ks, b)
        assert lhs == pytest.approx(a * blend_density(k, ks, b))


def test_update_network_counts_and_speeds():
    net = build_grid(GridSpec(3, 3), FD)
    blend = BlendParams(exposure=0.2, k0=0.95)
    update_network(net, 0.0, {}, blend)
    assert np.all(net.speed == 60.0)

    update_network(net, 0.0, {5: 1}, blend)
    assert net.k_sim[5] == 1.0
    assert np.all(np.delete(net.k_sim, 5) == 0.0)

    with pytest.raises(RuntimeError):
        update_network(net, 0.0, {999: 1}, blend)


def test_update_network_background_monotone():
    blend = BlendParams(exposure=0.2, k0=0.95)
    rng = np.random.default_rng(3)
    base = rng.uniform(0.5, 3.0, size=24)
    counts = {0: 2, 7: 1}
    net1 = build_grid(GridSpec(3, 3), FD)
    update_network(net1, base, counts, blend)
    net2 = build_grid(GridSpec(3, 3), FD)
    update_network(net2, base * 1.2, counts, blend)
    assert np.all(net2.k_hat >= net1.k_hat)
    assert np.all(net2.speed <= net1.speed + 1e-12)


def test_shortest_path_trivial_and_uniform():
    net = build_grid(GridSpec(4, 4, link_length_km=0.7), FD)
    assert shortest_path(net, 5, 5) == ([], 0.0, 0.0)
    # three links apart under uniform free flow: Manhattan path
    path, tmin, dkm = shortest_path(net, 0, net.grid.node_id(0, 3))
    assert len(path) == 4
    assert dkm == pytest.approx(3 * 0.7)
    assert tmin == pytest.approx(3 * 0.7 / 60.0 * 60.0)


def test_shortest_path_routes_around_congestion():
    net = build_grid(GridSpec(3, 3), FD)
    blend = BlendParams(exposure=1.0, k0=1.0)  # blended = simulated only
    # jam the direct middle corridor 3 -> 4 -> 5
    counts = {net.link_index[(3, 4)]: 50, net.link_index[(4, 5)]: 50}
    update_network(net, 0.0, counts, blend)
    path, tmin, _ = shortest_path(net, 3, 5)
    assert net.link_index[(3, 4)] not in [net.link_index[(a, b)]
                                          for a, b in zip(path, path[1:])]
    oracle_t, _ = best_path_by_enumeration(net, 3, 5)
    assert tmin == pytest.approx(oracle_t)


def test_shortest_path_matches_enumeration_on_random_grids():
    rng = np.random.default_rng(11)
    for rows, cols in [(3, 3), (3, 4), (4, 4)]:
        net = build_grid(GridSpec(rows, cols), FD)
        background = rng.uniform(0.0, 5.5, size=net.n_links)
        update_network(net, background, {}, BlendParams(exposure=0.0, k0=1.0))
        for _ in range(6):
            o, d = rng.integers(0, net.grid.n_nodes, 2)
            if o == d:
                continue
            _, tmin, dkm = shortest_path(net, int(o), int(d))
            oracle_t, _ = best_path_by_enumeration(net, int(o), int(d))
            assert tmin == pytest.approx(oracle_t, abs=1e-9)


def test_travel_time_bounds():
    net = build_grid(GridSpec(3, 3), FD)
    rng = np.random.default_rng(5)
    update_network(net, rng.uniform(0, 10, net.n_links), {2: 3},
                   BlendParams(exposure=0.1, k0=0.9))
    lo = net.link_length / FD.v_max * 60.0
    hi = net.link_length / FD.v_floor * 60.0
    assert np.all(net.travel_time >= lo - 1e-12)
    assert np.all(net.travel_time <= hi + 1e-12)


def test_background_profile_fill_and_scaling(tmp_path):
    profile = BackgroundProfile([0, 10], np.array([[1.0, 2.0], [3.0, 4.0]]), 2)
    assert np.allclose(profile.density_at(0), [1.0, 2.0])
    assert np.allclose(profile.density_at(9), [1.0, 2.0])   # nearest earlier
    assert np.allclose(profile.density_at(10), [3.0, 4.0])
    assert np.allclose(profile.density_at(500), [3.0, 4.0])
    scaled = profile.scaled(0.8)
    assert np.allclose(scaled.density_at(0), [0.8, 1.6])

    path = tmp_path / "bg.tsv"
    profile.save(path)
    loaded = BackgroundProfile.load(path, 2)
    assert np.allclose(loaded.density_at(10), profile.density_at(10))
    assert np.allclose(loaded.density_at(0), profile.density_at(0))


def test_background_profile_missing_entries_carry_forward(tmp_path):
    path = tmp_path / "bg.tsv"
    path.write_text("time_step\tlink_id\tdensity\n0\t0\t1.5\n0\t1\t2.5\n5\t1\t9.0\n")
    profile = BackgroundProfile.load(path, 2)
    # link 0 has no entry at t=5: nearest earlier value applies
    assert np.allclose(profile.density_at(5), [1.5, 9.0])
    assert np.allclose(profile.density_at(4), [1.5, 2.5])


def test_background_profile_rejects_bad_rows(tmp_path):
    path = tmp_path / "bg.tsv"
    path.write_text("0\t0\t-1.0\n")
    with pytest.raises(ConfigError):
        BackgroundProfile.load(path, 2)
    path.write_text("0\t99\t1.0\n")
    with pytest.raises(ConfigError):
        BackgroundProfile.load(path, 2)
