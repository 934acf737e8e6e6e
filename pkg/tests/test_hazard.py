import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from tvconc.hazard import (LOWER, UPPER, GroupHazardSpec, HazardSegment, PiecewiseHazard,
                           cumulative_hazard, hazard_at, quantile_time, sample_event_time,
                           survival_at)
from tvconc.simulate import SCENARIOS, builtin_scenario


def group(name, g):
    return builtin_scenario(name).hazards[g]


def quad_H(h, t):
    """Cumulative hazard by adaptive quadrature, split at the breakpoints."""
    pts = [e for e in h.breakpoints if e < t]
    return integrate.quad(lambda u: hazard_at(h, u), 0, t, points=pts or None, limit=200)[0]


def test_hazard_values():
    assert hazard_at(group("M0", 0), 0.7) == 0.5
    assert hazard_at(group("M0", 1), 0.7) == pytest.approx(0.7)
    assert hazard_at(group("M1", 1), 0.5) == pytest.approx(0.5)
    assert hazard_at(group("M1", 1), 0.500001) == pytest.approx(5.00001)


def test_cumulative_hazard_values():
    assert cumulative_hazard(group("M0", 1), 1.0) == pytest.approx(0.5)
    assert cumulative_hazard(group("M1", 1), 1.0) == pytest.approx(3.875)
    for name in SCENARIOS[:6]:
        for g in (0, 1):
            assert cumulative_hazard(group(name, g), 0.0) == 0.0


@pytest.mark.parametrize("name", SCENARIOS[:6])
def test_cumulative_hazard_matches_quadrature(name):
    for g in (0, 1):
        h = group(name, g)
        for t in (0.03, 0.1, 0.37, 0.5, 0.77, 0.9, 1.05, 2.0):
            assert h.cumulative_hazard(t) == pytest.approx(quad_H(h, t), rel=1e-9, abs=1e-12)


def test_survival_values():
    assert survival_at(group("M0", 0), 1.0) == pytest.approx(math.exp(-quad_H(group("M0", 0), 1.0)))
    assert survival_at(group("M0", 0), 1.0) == pytest.approx(0.6065, abs=1e-4)
    assert survival_at(group("M3", 1), 1.0) == pytest.approx(math.exp(-0.25))
    assert survival_at(group("M5", 1), 0.0) == 1.0


def bisect_quantile(h, s):
    return optimize.brentq(lambda u: survival_at(h, u) - s, 0.0, 100.0, xtol=1e-14)


def test_quantile_values():
    assert quantile_time(PiecewiseHazard.constant(0.5), math.exp(-0.5)) == pytest.approx(1.0)
    assert quantile_time(group("M0", 1), math.exp(-0.5)) == pytest.approx(1.0)
    root = math.sqrt((-math.log(0.01) + 1.125) / 5)
    assert quantile_time(group("M1", 1), 0.01) == pytest.approx(root, rel=1e-12)
    assert quantile_time(group("M1", 1), 0.01) == pytest.approx(bisect_quantile(group("M1", 1), 0.01))


@pytest.mark.parametrize("name", SCENARIOS[:6])
def test_quantile_matches_bisection(name):
    for g in (0, 1):
        h = group(name, g)
        for s in (0.9, 0.75, 0.5, 0.25, 0.05):
            assert quantile_time(h, s) == pytest.approx(bisect_quantile(h, s), abs=1e-10)


def test_quantile_inverts_survival():
    h = group("M5", 0)
    s = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(h.survival(h.quantile(s)), s, rtol=1e-12)


def test_quantile_conventions_on_flat_segment():
    h = PiecewiseHazard([HazardSegment(0, 1, 1.0, 0.0), HazardSegment(1, 2, 0.0, 0.0),
                         HazardSegment(2, math.inf, 1.0, 0.0)])
    s = math.exp(-1.0)
    assert h.quantile(s, LOWER) == pytest.approx(1.0)
    assert h.quantile(s, UPPER) == pytest.approx(2.0)


def test_quantile_unreachable():
    h = PiecewiseHazard([HazardSegment(0, 1, 1.0, 0.0), HazardSegment(1, math.inf, 0.0, 0.0)])
    with pytest.raises(ValueError):
        quantile_time(h, 0.1)
    with pytest.raises(ValueError):
        quantile_time(h, 1.5)


def test_segment_validation():
    with pytest.raises(ValueError):
        HazardSegment(0, 1, -1.0, 0.0)
    with pytest.raises(ValueError):
        HazardSegment(1, 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        PiecewiseHazard([HazardSegment(0, 1, 1.0, 0.0), HazardSegment(2, math.inf, 1.0, 0.0)])
    with pytest.raises(ValueError):
        PiecewiseHazard([HazardSegment(0, 1, 1.0, 0.0)])


@pytest.mark.parametrize("rate", [0.05, 0.5, 1.4])
def test_sampler_constant_ks(rate):
    x = PiecewiseHazard.constant(rate).sample(np.random.default_rng(1), 100_000)
    assert stats.kstest(x, stats.expon(scale=1 / rate).cdf).statistic < 0.01


def test_sampler_rayleigh_mean():
    x = group("M0", 1).sample(np.random.default_rng(2), 100_000)
    assert x.mean() == pytest.approx(math.sqrt(math.pi / 2), abs=0.01)


def test_sampler_deterministic():
    h = group("M4", 0)
    a = [sample_event_time(h, np.random.default_rng(3)) for _ in range(3)]
    b = h.sample(np.random.default_rng(3), 5)
    c = h.sample(np.random.default_rng(3), 5)
    np.testing.assert_array_equal(b, c)
    assert a[0] == b[0]


def test_round_trip_dict():
    spec = builtin_scenario("M5").hazards
    back = GroupHazardSpec.from_dict(spec.to_dict())
    assert back[0] == spec[0] and back[1] == spec[1]


def test_json_list_of_groups():
    raw = [[{"start": 0, "end": None, "a": 0.5, "b": 0}],
           [{"start": 0, "end": 0.5, "a": 0, "b": 1}, {"start": 0.5, "end": None, "a": 0, "b": 10}]]
    spec = GroupHazardSpec.from_dict(raw)
    assert spec[1] == builtin_scenario("M1").hazards[1]
    assert spec[0] == builtin_scenario("M1").hazards[0]
