import numpy as np
import pytest

from tvconc.dataset import CONTINUOUS, DISCRETE, SurvivalDataset


def brute_force_counts(time, event, score_at, until=None, tied_events=True):
    """Literal double loop over ordered pairs. ``score_at(t, k)`` is the score
    of record ``k`` at time ``t``."""
    strict = tied = comp = tied_time = 0
    n = len(time)
    for i in range(n):
        if not event[i] or (until is not None and time[i] > until):
            continue
        for j in range(n):
            if j == i or time[i] > time[j]:
                continue
            if not tied_events and time[i] == time[j] and event[j]:
                continue
            comp += 1
            tied_time += time[i] == time[j]
            qi, qj = score_at(time[i], i), score_at(time[i], j)
            if qi > qj:
                strict += 1
            elif qi == qj:
                tied += 1
    return strict, tied, comp, tied_time


def make_dataset(time, event, covariates=None, mode=CONTINUOUS):
    time = np.asarray(time, dtype=float)
    if covariates is None:
        covariates = np.zeros((time.size, 1))
    covariates = np.asarray(covariates, dtype=float).reshape(time.size, -1)
    return SurvivalDataset(time, np.asarray(event, dtype=bool), covariates, mode)


def random_tied_dataset(rng, n, n_times=6, n_groups=4, n_cov=1, mode=DISCRETE):
    """Small data set with many repeated times and covariate rows."""
    time = rng.integers(1, n_times + 1, n).astype(float)
    event = rng.random(n) < 0.7
    Z = rng.integers(0, n_groups, (n, n_cov)).astype(float)
    return SurvivalDataset(time, event, Z, mode)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
