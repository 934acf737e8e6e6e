import json
import math

import numpy as np
import pytest
from scipy import integrate

from tvconc.hazard import hazard_at
from tvconc.simulate import (CensoringSpec, DiscreteGroupHazard, ScenarioSpec, builtin_scenario,
                             generate, sample_discrete_event)


def test_m0_shape():
    data = generate(builtin_scenario("M0"), 11)
    assert len(data) == 2000
    assert np.bincount(data.covariates[:, 0].astype(int)).tolist() == [1000, 1000]
    assert data.time.max() <= 1.1


def test_m6_shape():
    data = generate(builtin_scenario("M6"), 11)
    assert len(data) == 20000
    assert data.n_covariates == 10
    assert set(np.unique(data.time)) <= set(range(1, 11))
    # noise covariates are fair coins
    assert np.abs(data.covariates[:, 1:].mean(axis=0) - 0.5).max() < 0.02


def test_infinite_window_rejected():
    with pytest.raises(ValueError, match="finite"):
        CensoringSpec(random_rate=0.0, admin_time=math.inf)


def test_builtin_hazards():
    assert hazard_at(builtin_scenario("M4").hazards[0], 0.05) == 6.0
    assert builtin_scenario("M6").hazards[1][3 - 1] == 0.5
    h = builtin_scenario("M2").hazards[0]
    for t in (0.0, 0.3, 0.9, 5.0):
        assert hazard_at(h, t) == 0.25


def test_unknown_scenario():
    with pytest.raises(ValueError):
        builtin_scenario("M9")


def test_spec_validation():
    spec = builtin_scenario("M0")
    with pytest.raises(ValueError):
        ScenarioSpec("x", "continuous", (10,), spec.hazards)
    with pytest.raises(ValueError):
        DiscreteGroupHazard({0: [0.5, 1.5]})
    with pytest.raises(ValueError):
        DiscreteGroupHazard({0: [0.5, 0.5], 1: [0.5]})


def test_spec_json_round_trip(tmp_path):
    for name in ("M1", "M6"):
        spec = builtin_scenario(name)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(spec.to_dict()))
        back = ScenarioSpec.from_json(path)
        assert generate(back, 3) == generate(spec, 3)


def test_discrete_event_edge_cases():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample_discrete_event(np.zeros(10), rng) == (10, False)
        assert sample_discrete_event([1.0] + [0.2] * 9, rng) == (1, True)


def test_discrete_event_frequency():
    rng = np.random.default_rng(5)
    table = builtin_scenario("M6").hazards[0]
    draws = np.array([sample_discrete_event(table, rng) for _ in range(100_000)], dtype=object)
    hit = np.array([e and t <= 5 for t, e in draws])
    assert hit.mean() == pytest.approx(1 - 0.95 ** 5, abs=0.005)


def test_event_fraction_matches_analytic():
    """P(D = 1) for M0 group 0 under Exp(0.05) censoring capped at 1.1."""
    spec = builtin_scenario("M0")
    h = spec.hazards[0]
    density = lambda x: hazard_at(h, x) * h.survival(x) * math.exp(-0.05 * x)
    expected = integrate.quad(density, 0, 1.1)[0]
    events = [generate(spec, s).event[:1000].mean() for s in range(20)]
    assert np.mean(events) == pytest.approx(expected, abs=0.01)


def test_generate_deterministic():
    spec = builtin_scenario("M5")
    assert generate(spec, 4) == generate(spec, 4)
    assert not generate(spec, 4) == generate(spec, 5)


def test_admin_only_censoring():
    data = generate(builtin_scenario("M4"), 0)
    censored = data.time[~data.event]
    np.testing.assert_array_equal(censored, 1.05)
