"""Group-wise Kaplan-Meier curves, triangular-kernel smoothing and hazard
recovery via ``alpha = -S'/S``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SurvivalDataset
from .hazard import LOWER
from .risk import GroupModel


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous step function equal to 1 before the first jump."""

    jump_times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right")
        return np.concatenate([[1.0], self.values])[idx]


def kaplan_meier(data: SurvivalDataset, group=None) -> StepSurvival:
    """Product-limit estimate for the records selected by ``group``.

    ``group`` is a boolean mask, a callable mapping the covariate matrix to a
    mask, or ``None`` for all records. At risk at ``t`` means ``T >= t``.
    """
    if group is None:
        mask = np.ones(len(data), dtype=bool)
    elif callable(group):
        mask = np.asarray(group(data.covariates), dtype=bool)
    else:
        mask = np.asarray(group, dtype=bool)
    if not mask.any():
        raise ValueError("empty group")
    time = np.sort(data.time[mask])
    ev_times = np.sort(data.time[mask & data.event])
    jumps, deaths = np.unique(ev_times, return_counts=True)
    at_risk = time.size - np.searchsorted(time, jumps, side="left")
    values = np.cumprod(1.0 - deaths / at_risk)
    return StepSurvival(jumps, values)


def triangular_kernel(x, b):
    return np.maximum(0.0, 1.0 - np.abs(x) / b) / b


@dataclass(frozen=True)
class SmoothedSurvival:
    """Smoothed survival on the grid ``0, delta, ..., report_end``."""

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    report_end: float

    @property
    def delta(self) -> float:
        return float(self.grid[1] - self.grid[0])


def smooth_survival(s: StepSurvival, b: float = 0.05, delta: float | None = None,
                    window_end: float = 1.05) -> SmoothedSurvival:
    """Convolve ``s`` with a triangular kernel of half-width ``b``.

    ``s`` is extended with the value 1 on ``[-b, 0)`` and the output is kept
    only on ``[0, window_end - b]`` so that every reported point sees a full
    kernel window inside ``[-b, window_end]``.
    """
    if b <= 0:
        raise ValueError("bandwidth must be positive")
    if delta is None:
        delta = b / 50
    if delta > b / 10 * (1 + 1e-12):
        raise ValueError("grid step must be at most b/10")
    if window_end <= b:
        raise ValueError("window_end must exceed the bandwidth")
    half = int(round(b / delta))
    if abs(half * delta - b) > 1e-9 * b:
        raise ValueError("bandwidth must be a whole number of grid steps")
    n_report = int(np.floor((window_end - b) / delta + 1e-9))
    ks = np.arange(-half, n_report + half + 1)
    u = ks * delta
    su = np.where(u < 0, 1.0, s(np.maximum(u, 0.0)))
    weights = triangular_kernel(np.arange(-half, half + 1) * delta, b) * delta
    smoothed = np.convolve(su, weights, mode="valid")
    grid = np.arange(n_report + 1) * delta
    return SmoothedSurvival(grid, np.clip(smoothed, 0.0, 1.0), float(b), float(window_end - b))


def hazard_from_smoothed(s: SmoothedSurvival) -> np.ndarray:
    """``-dS/dt / S`` on the grid by centred differences, one-sided at the ends,
    clamped below at 0."""
    v = s.values
    if v.min() < 1e-6:
        raise ValueError("smoothed survival vanishes on the reported range")
    deriv = np.gradient(v, s.delta, edge_order=1)
    return np.maximum(-deriv / v, 0.0)


class SmoothedCurve:
    """Smoothed survival plus its hazard, queried by linear interpolation."""

    def __init__(self, smoothed: SmoothedSurvival):
        self.smoothed = smoothed
        self.hazard_values = hazard_from_smoothed(smoothed)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if (t < 0).any() or (t > self.smoothed.report_end + 1e-12).any():
            raise ValueError(f"query outside the reported range [0, {self.smoothed.report_end}]")
        return t

    def survival(self, t):
        return np.interp(self._check(t), self.smoothed.grid, self.smoothed.values)

    def hazard(self, t):
        return np.interp(self._check(t), self.smoothed.grid, self.hazard_values)

    def quantile(self, s, convention=LOWER):
        """Grid inversion; ``inf`` when the curve stays above ``s`` on the
        whole reported range (the quantile is censored at the window edge)."""
        v = self.smoothed.values
        if convention == LOWER:
            hit = np.nonzero(v <= s)[0]
            return float(self.smoothed.grid[hit[0]]) if hit.size else np.inf
        hit = np.nonzero(v >= s)[0]
        if hit.size == 0:
            raise ValueError(f"survival is below {s} on the whole reported range")
        return float(self.smoothed.grid[hit[-1]]) if hit[-1] < v.size - 1 else np.inf


def km_model(data: SurvivalDataset, group_col: int = 0, bandwidth: float = 0.05,
             window_end: float | None = None, delta: float | None = None) -> GroupModel:
    """Smoothed Kaplan-Meier survival model, one curve per value of ``z[group_col]``.

    ``window_end`` defaults to the largest observed time. Queries are allowed
    on ``[0, window_end - bandwidth]`` only.
    """
    if window_end is None:
        window_end = float(data.time.max())
    labels = data.covariates[:, group_col]
    curves = {}
    for g in np.unique(labels):
        step = kaplan_meier(data, labels == g)
        curves[int(g)] = SmoothedCurve(smooth_survival(step, bandwidth, delta, window_end))
    report_end = next(iter(curves.values())).smoothed.report_end
    return GroupModel(curves, group_col, window=report_end)
