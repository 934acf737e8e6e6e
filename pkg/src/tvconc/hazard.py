"""Analytic piecewise-linear hazard functions.

A hazard is a sequence of segments ``a + b*t`` on ``(start, end]`` covering
``[0, inf)``; the first segment also owns ``t = 0``. Cumulative hazard is
piecewise quadratic and is inverted in closed form, so sampling never needs
a root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

LOWER = "le"  # smallest u with S(u) <= s
UPPER = "ge"  # largest u with S(u) >= s


@dataclass(frozen=True)
class HazardSegment:
    start: float
    end: float
    a: float
    b: float = 0.0

    def __post_init__(self):
        if not (self.start >= 0 and self.end > self.start):
            raise ValueError(f"segment needs 0 <= start < end, got [{self.start}, {self.end}]")
        if self.a + self.b * self.start < 0:
            raise ValueError("hazard is negative at segment start")
        if math.isinf(self.end):
            if self.b < 0:
                raise ValueError("unbounded segment with negative slope turns negative")
        elif self.a + self.b * self.end < 0:
            raise ValueError("hazard is negative at segment end")


class PiecewiseHazard:
    """Hazard ``alpha(t)`` built from contiguous :class:`HazardSegment` pieces."""

    def __init__(self, segments: Sequence[HazardSegment]):
        segments = tuple(segments)
        if not segments:
            raise ValueError("at least one segment required")
        if segments[0].start != 0:
            raise ValueError("first segment must start at 0")
        for left, right in zip(segments, segments[1:]):
            if left.end != right.start:
                raise ValueError(f"gap or overlap between segments at {left.end} / {right.start}")
        if not math.isinf(segments[-1].end):
            raise ValueError("last segment must extend to infinity")
        self.segments = segments
        self._start = np.array([s.start for s in segments])
        self._end = np.array([s.end for s in segments])
        self._a = np.array([s.a for s in segments])
        self._b = np.array([s.b for s in segments])
        widths = self._end[:-1] - self._start[:-1]
        incr = self._a[:-1] * widths + 0.5 * self._b[:-1] * (self._end[:-1] ** 2 - self._start[:-1] ** 2)
        self._h_start = np.concatenate([[0.0], np.cumsum(incr)])
        last_grows = segments[-1].a > 0 or segments[-1].b > 0
        self._h_end = np.append(self._h_start[1:], np.inf if last_grows else self._h_start[-1])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Finite segment boundaries, excluding 0."""
        return tuple(float(e) for e in self._end[:-1])

    @classmethod
    def constant(cls, rate: float) -> "PiecewiseHazard":
        return cls([HazardSegment(0.0, math.inf, rate, 0.0)])

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[float, float, float]]) -> "PiecewiseHazard":
        """Build from ``(end, a, b)`` triples; the last end should be ``inf``."""
        segs, start = [], 0.0
        for end, a, b in pieces:
            segs.append(HazardSegment(start, float(end), float(a), float(b)))
            start = float(end)
        return cls(segs)

    def to_dict(self) -> list[dict]:
        return [{"start": s.start, "end": None if math.isinf(s.end) else s.end, "a": s.a, "b": s.b}
                for s in self.segments]

    @classmethod
    def from_dict(cls, items) -> "PiecewiseHazard":
        return cls([HazardSegment(float(d["start"]),
                                  math.inf if d.get("end") is None else float(d["end"]),
                                  float(d["a"]), float(d.get("b", 0.0))) for d in items])

    def __repr__(self):
        body = ", ".join(f"({s.start:g},{s.end:g}]:{s.a:g}+{s.b:g}t" for s in self.segments)
        return f"PiecewiseHazard({body})"

    def __eq__(self, other):
        return isinstance(other, PiecewiseHazard) and self.segments == other.segments

    def __hash__(self):
        return hash(self.segments)

    def _segment(self, t):
        return np.searchsorted(self._end, t, side="left")

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        k = self._segment(t)
        return self._a[k] + self._b[k] * t

    def cumulative_hazard(self, t):
        t = np.asarray(t, dtype=float)
        k = self._segment(t)
        s = self._start[k]
        return self._h_start[k] + self._a[k] * (t - s) + 0.5 * self._b[k] * (t * t - s * s)

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def quantile(self, s, convention: str = LOWER):
        """Time at which survival falls to ``s``.

        ``convention='le'`` returns the smallest ``u`` with ``S(u) <= s``;
        ``'ge'`` returns the largest ``u`` with ``S(u) >= s``. They differ
        only where the hazard is zero on an interval.
        """
        s = np.asarray(s, dtype=float)
        if ((s <= 0) | (s > 1)).any():
            raise ValueError("survival level must lie in (0, 1]")
        target = -np.log(s)
        if (target > self._h_end[-1]).any() or (
                convention == UPPER and (target >= self._h_end[-1]).any()):
            raise ValueError("survival level is never reached: total hazard is bounded")
        if convention == LOWER:
            k = np.searchsorted(self._h_end, target, side="left")
        elif convention == UPPER:
            k = np.searchsorted(self._h_start, target, side="right") - 1
        else:
            raise ValueError(f"unknown quantile convention {convention!r}")
        start = self._start[k]
        rate0 = self._a[k] + self._b[k] * start
        rest = target - self._h_start[k]
        disc = np.maximum(rate0 * rate0 + 2.0 * self._b[k] * rest, 0.0)
        denom = rate0 + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(denom > 0, 2.0 * rest / denom, 0.0)
        if convention == UPPER:
            flat = (self._a[k] == 0) & (self._b[k] == 0)
            step = np.where(flat, self._end[k] - start, step)
        return start + step

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws of the event time."""
        u = rng.random(size)
        return self.quantile(1.0 - u)


# Scalar conveniences mirroring the operation names.

def hazard_at(h: PiecewiseHazard, t: float) -> float:
    return float(h.hazard(t))


def cumulative_hazard(h: PiecewiseHazard, t: float) -> float:
    return float(h.cumulative_hazard(t))


def survival_at(h: PiecewiseHazard, t: float) -> float:
    return float(h.survival(t))


def quantile_time(h: PiecewiseHazard, s: float, convention: str = LOWER) -> float:
    if not 0 < s < 1:
        raise ValueError("quantile level must lie in (0, 1)")
    return float(h.quantile(s, convention))


def sample_event_time(h: PiecewiseHazard, rng: np.random.Generator) -> float:
    return float(h.sample(rng))


class GroupHazardSpec(Mapping):
    """Mapping from integer group label to :class:`PiecewiseHazard`."""

    def __init__(self, hazards: Mapping[int, PiecewiseHazard]):
        if not hazards:
            raise ValueError("at least one group required")
        self._hazards = {int(k): v for k, v in sorted(hazards.items())}

    def __getitem__(self, key):
        return self._hazards[int(key)]

    def __iter__(self):
        return iter(self._hazards)

    def __len__(self):
        return len(self._hazards)

    def __repr__(self):
        return f"GroupHazardSpec({self._hazards!r})"

    def to_dict(self):
        return {str(k): h.to_dict() for k, h in self._hazards.items()}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, list):
            d = dict(enumerate(d))
        return cls({int(k): PiecewiseHazard.from_dict(v) for k, v in d.items()})
