import math

import numpy as np
import pytest

from modpricing.choice import (ChoiceParams, adjustment_disutility,
                               choice_probabilities, option_utility,
                               outside_utility, sample_choice)
from modpricing.errors import ConfigError

P = ChoiceParams()


def test_adjustment_disutility():
    assert adjustment_disutility(0.0, P) == 0.0
    assert adjustment_disutility(1.0, P) == 2.0
    assert adjustment_disutility(-1.0, P) == -1.0


def test_adjustment_disutility_shape():
    # piecewise linear, continuous at zero, convex since e2 > e1
    deltas = np.linspace(-3, 3, 301)
    vals = np.array([adjustment_disutility(d, P) for d in deltas])
    slopes = np.diff(vals) / np.diff(deltas)
    assert np.all(np.diff(slopes) >= -1e-12)
    assert adjustment_disutility(1e-12, P) == pytest.approx(0.0, abs=1e-11)


def test_option_utility_values():
    assert option_utility("single", 2.35, 0.0, 10.0, P) == pytest.approx(0.925)
    assert option_utility("shared", 1.41, 0.0, 12.0, P) == pytest.approx(1.079)
    up = option_utility("single", 2.0, 1.0, 10.0, P)
    down = option_utility("single", 2.0, -1.0, 10.0, P)
    assert down - up == pytest.approx(P.mu * (P.e2 + P.e1))
    with pytest.raises(ConfigError):
        option_utility("walk", 1.0, 0.0, 5.0, P)


def test_option_utility_monotonicity():
    base = option_utility("single", 2.0, 0.0, 10.0, P)
    assert option_utility("single", 2.0, 0.5, 10.0, P) < base
    assert option_utility("single", 2.5, 0.0, 10.0, P) < base
    # shared utility falls faster in travel time by the reliability factor
    d_single = (option_utility("single", 2.0, 0.0, 10.0, P)
                - option_utility("single", 2.0, 0.0, 20.0, P))
    d_shared = (option_utility("shared", 2.0, 0.0, 10.0, P)
                - option_utility("shared", 2.0, 0.0, 20.0, P))
    assert d_shared / d_single == pytest.approx(P.b_time_shared)


def test_outside_utility():
    u_o, v0 = outside_utility(10.0, 0.5, P)
    assert u_o == pytest.approx(1.725)
    assert v0 == pytest.approx(math.exp(1.725) + 1.0)
    u_o, _ = outside_utility(0.0, 0.0, P)
    assert u_o == pytest.approx(2.5)
    params5 = ChoiceParams(b_fare_original=5.0)
    u_o, _ = outside_utility(10.0, 0.5, params5)
    assert u_o == pytest.approx(1.1)


def test_choice_probabilities():
    p = choice_probabilities([1.3, 1.3, 1.3, 1.3])
    assert p == pytest.approx([0.25] * 4)

    p = choice_probabilities([0.925, 1.725, 0.0])
    expected = math.exp(0.925) / (math.exp(0.925) + math.exp(1.725) + 1.0)
    assert p[0] == pytest.approx(expected)
    assert p[0] == pytest.approx(0.27609, abs=1e-4)

    shifted = choice_probabilities([0.925 + 7, 1.725 + 7, 0.0 + 7])
    assert shifted == pytest.approx(p, abs=1e-12)


def test_choice_probabilities_are_valid():
    rng = np.random.default_rng(9)
    for _ in range(50):
        u = rng.uniform(-30, 30, size=rng.integers(2, 6))
        p = choice_probabilities(u)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(p > 0)
    # overflow guard
    p = choice_probabilities([800.0, 801.0])
    assert p.sum() == pytest.approx(1.0)


def test_sample_choice():
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert sample_choice([1.0, 0.0, 0.0, 0.0], rng) == 0

    rng = np.random.default_rng(2)
    draws = [sample_choice([0.25] * 4, rng) for _ in range(10_000)]
    freqs = np.bincount(draws, minlength=4) / 10_000
    assert freqs == pytest.approx([0.25] * 4, abs=0.015)

    a = [sample_choice([0.3, 0.2, 0.5], np.random.default_rng(5)) for _ in range(20)]
    b = [sample_choice([0.3, 0.2, 0.5], np.random.default_rng(5)) for _ in range(20)]
    assert a == b
