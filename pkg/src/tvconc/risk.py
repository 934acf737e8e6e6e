"""Time-varying risk scores ``q(t | z)``.

A :class:`RiskScore` is evaluated on a grid: ``q.table(t, Z)[a, b]`` is the
score at time ``t[a]`` of an individual with covariates ``Z[b]``. Pairs are
compared at the earlier (event) time, so concordance only ever needs the
table at observed event times.
"""

from __future__ import annotations

import math
import re
from typing import Callable

import numpy as np

from .hazard import LOWER, GroupHazardSpec


class SurvivalModel:
    """Provider of ``S(t|z)``, ``alpha(t|z)`` and survival quantiles.

    Subclasses implement the three ``*_table`` methods, each returning an
    array of shape ``(len(t), len(Z))`` (``quantile_table`` returns ``(len(Z),)``).
    """

    #: right edge of the time window on which the model may be queried
    window = math.inf
    discrete = False

    def survival_table(self, t, Z) -> np.ndarray:
        raise NotImplementedError

    def hazard_table(self, t, Z) -> np.ndarray:
        raise NotImplementedError

    def quantile_table(self, s, Z, convention=LOWER) -> np.ndarray:
        raise NotImplementedError

    def survival(self, t, z) -> float:
        return float(self.survival_table([t], np.atleast_2d(z))[0, 0])

    def hazard(self, t, z) -> float:
        return float(self.hazard_table([t], np.atleast_2d(z))[0, 0])

    def quantile(self, s, z, convention=LOWER) -> float:
        return float(self.quantile_table(s, np.atleast_2d(z), convention)[0])


class GroupModel(SurvivalModel):
    """Survival model with one curve per group; the group is ``z[group_col]``.

    Each curve must offer vectorised ``hazard(t)``, ``survival(t)`` and
    ``quantile(s, convention)``.
    """

    def __init__(self, curves, group_col: int = 0, window: float = math.inf, discrete: bool = False):
        self.curves = {int(k): v for k, v in dict(curves).items()}
        self.group_col = group_col
        self.window = window
        self.discrete = discrete

    def groups_of(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        raw = Z[:, self.group_col]
        keys = raw.astype(int)
        if (keys != raw).any() or not np.isin(keys, list(self.curves)).all():
            raise ValueError(f"covariate z{self.group_col} holds values outside the model groups {sorted(self.curves)}")
        return keys

    def _check_time(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if (t < 0).any() or (t > self.window * (1 + 1e-12)).any():
            raise ValueError(f"time outside the model window [0, {self.window}]")
        return t

    def _table(self, method, t, Z):
        t = self._check_time(t)
        keys = self.groups_of(Z)
        uniq, inv = np.unique(keys, return_inverse=True)
        per_group = np.column_stack([getattr(self.curves[g], method)(t) for g in uniq])
        return per_group[:, inv]

    def survival_table(self, t, Z):
        return self._table("survival", t, Z)

    def hazard_table(self, t, Z):
        return self._table("hazard", t, Z)

    def quantile_table(self, s, Z, convention=LOWER):
        keys = self.groups_of(Z)
        lookup = {g: float(self.curves[g].quantile(s, convention)) for g in np.unique(keys)}
        return np.array([lookup[g] for g in keys])


def analytic_model(hazards: GroupHazardSpec, group_col: int = 0) -> GroupModel:
    """Model backed by exact piecewise hazards."""
    return GroupModel(hazards, group_col)


class DiscreteHazardCurve:
    """Discrete hazard ``alpha(t)`` on bins ``1..K`` with derived survival."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        self.horizon = self.table.size
        # surv[t] = P(X > t), surv[0] = 1
        self.surv = np.concatenate([[1.0], np.cumprod(1.0 - self.table)])

    def _bins(self, t, lo):
        t = np.asarray(t, dtype=float)
        if (t != np.round(t)).any() or (t < lo).any() or (t > self.horizon).any():
            raise ValueError(f"discrete time must be an integer in [{lo}, {self.horizon}]")
        return t.astype(int)

    def hazard(self, t):
        return self.table[self._bins(t, 1) - 1]

    def survival(self, t):
        return self.surv[self._bins(t, 0)]

    def cumulative_hazard(self, t):
        return np.concatenate([[0.0], np.cumsum(self.table)])[self._bins(t, 0)]

    def quantile(self, s, convention=LOWER):
        if convention == LOWER:
            hit = np.nonzero(self.surv <= s)[0]
            if hit.size == 0:
                raise ValueError("survival level not reached within the horizon")
            return float(hit[0])
        hit = np.nonzero(self.surv >= s)[0]
        return float(hit[-1])


def discrete_group_model(tables, group_col: int = 0) -> GroupModel:
    """Model backed by exact per-group discrete hazard tables."""
    curves = {g: DiscreteHazardCurve(tables[g]) for g in tables}
    horizon = next(iter(curves.values())).horizon
    return GroupModel(curves, group_col, window=horizon, discrete=True)


class RiskScore:
    """Risk score defined by a table function ``(t, Z) -> (len(t), len(Z))``.

    ``time_constant`` marks scores that ignore ``t``; concordance can then use
    the O(n log n) path.
    """

    def __init__(self, label: str, table: Callable, time_constant: bool = False):
        self.label = label
        self._table = table
        self.time_constant = time_constant

    def table(self, t, Z) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return np.asarray(self._table(t, Z), dtype=float).reshape(t.size, Z.shape[0])

    def __call__(self, t, z) -> float:
        return float(self.table([t], np.atleast_2d(z))[0, 0])

    def constant_values(self, Z) -> np.ndarray:
        """Per-row scores of a time-constant score."""
        if not self.time_constant:
            raise ValueError(f"risk score {self.label!r} depends on time")
        return self.table([0.0], Z)[0]

    def compose(self, fn: Callable, label: str | None = None) -> "RiskScore":
        """Score ``fn(q(t, z))``; comparisons are unchanged when ``fn`` is strictly increasing."""
        return RiskScore(label or f"f({self.label})", lambda t, Z: fn(self.table(t, Z)), self.time_constant)

    def __repr__(self):
        return f"RiskScore({self.label!r})"


def _constant(label, values_fn):
    return RiskScore(label, lambda t, Z: np.broadcast_to(values_fn(Z), (t.size, Z.shape[0])),
                     time_constant=True)


def hazard_score(model: SurvivalModel) -> RiskScore:
    """``q(t|z) = alpha(t|z)``."""
    return RiskScore("hazard", model.hazard_table)


def antolini_score(model: SurvivalModel) -> RiskScore:
    """``q(t|z) = -S(t|z)``, survival at the first event time."""
    return RiskScore("antolini", lambda t, Z: -model.survival_table(t, Z))


def fixed_time_survival_score(model: SurvivalModel, t0: float) -> RiskScore:
    """``q(t|z) = -S(t0|z)``."""
    if not (t0 > 0 and t0 <= model.window):
        raise ValueError(f"t0={t0} outside the model window (0, {model.window}]")
    return _constant(f"surv@{t0:g}", lambda Z: -model.survival_table([t0], Z)[0])


def quantile_time_score(model: SurvivalModel, s: float, convention: str = LOWER) -> RiskScore:
    """``q(t|z) = -inf{u : S(u|z) <= s}`` (or the upper quantile)."""
    if not 0 < s < 1:
        raise ValueError("quantile level must lie in (0, 1)")
    return _constant(f"quantile@{s:g}", lambda Z: -model.quantile_table(s, Z, convention))


def linear_predictor_score(beta) -> RiskScore:
    """``q(t|z) = z . beta``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))

    def values(Z):
        if Z.shape[1] != beta.size:
            raise ValueError(f"covariate dimension {Z.shape[1]} does not match beta of length {beta.size}")
        return Z @ beta

    return _constant("linpred", values)


_SELECTOR = re.compile(r"^(hazard|antolini|surv@(?P<t0>[^,]+)|quantile@(?P<s>[^,]+)|linpred:(?P<beta>.+))$")


def parse_selector(selector: str, model: SurvivalModel | None = None) -> RiskScore:
    """Build a score from ``hazard``, ``antolini``, ``surv@<t0>``, ``quantile@<s>`` or ``linpred:<b0,b1,...>``."""
    m = _SELECTOR.match(selector.strip())
    if not m:
        raise ValueError(f"unrecognised risk score selector {selector!r}")
    if m.group("beta") is not None:
        return linear_predictor_score([float(x) for x in m.group("beta").split(",")])
    if model is None:
        raise ValueError(f"risk score {selector!r} needs a survival model")
    if selector == "hazard":
        return hazard_score(model)
    if selector == "antolini":
        return antolini_score(model)
    if m.group("t0") is not None:
        return fixed_time_survival_score(model, float(m.group("t0")))
    return quantile_time_score(model, float(m.group("s")))
