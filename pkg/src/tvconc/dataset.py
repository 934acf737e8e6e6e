"""Survival observations, the dataset container and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CONTINUOUS = "continuous"
DISCRETE = "discrete"
MODES = (CONTINUOUS, DISCRETE)


class DataError(ValueError):
    """Raised for malformed survival data."""


@dataclass(frozen=True)
class SurvivalRecord:
    """One observation: time at risk, event indicator, covariates."""

    time: float
    event: bool
    covariates: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Immutable column-oriented collection of survival records.

    Parameters
    ----------
    time : array-like, shape (n,)
        Observed times ``min(X, U)``.
    event : array-like of bool, shape (n,)
        ``True`` when the event was observed.
    covariates : array-like, shape (n, p)
        Covariate matrix. ``p`` may be zero.
    mode : {'continuous', 'discrete'}
    covariate_names : sequence of str, optional
        Defaults to ``z0, z1, ...``.
    """

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    mode: str = CONTINUOUS
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.asarray(self.event).reshape(-1)
        if event.dtype != bool:
            if not np.isin(event, (0, 1)).all():
                raise DataError("event indicators must be 0 or 1")
            event = event.astype(bool)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1 and cov.size == time.size:
            cov = cov.reshape(-1, 1)
        elif cov.size == 0:
            cov = np.zeros((time.size, 0))
        if self.mode not in MODES:
            raise DataError(f"unknown mode {self.mode!r}")
        if time.size == 0:
            raise DataError("empty dataset")
        if event.size != time.size or cov.shape[0] != time.size:
            raise DataError("time, event and covariates must have the same length")
        if not np.isfinite(time).all() or (time < 0).any():
            raise DataError("times must be finite and non-negative")
        if self.mode == DISCRETE and ((time != np.round(time)) | (time < 1)).any():
            raise DataError("discrete times must be positive integers")
        names = tuple(self.covariate_names) or tuple(f"z{k}" for k in range(cov.shape[1]))
        if len(names) != cov.shape[1]:
            raise DataError("covariate_names does not match covariate dimension")
        for arr in (time, event, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], mode: str = CONTINUOUS,
                     covariate_names: Sequence[str] = ()) -> "SurvivalDataset":
        if not records:
            raise DataError("empty dataset")
        dims = {len(r.covariates) for r in records}
        if len(dims) != 1:
            raise DataError("covariate length differs between records")
        return cls(
            time=[r.time for r in records],
            event=np.array([bool(r.event) for r in records]),
            covariates=np.array([r.covariates for r in records], dtype=float).reshape(len(records), dims.pop()),
            mode=mode,
            covariate_names=tuple(covariate_names),
        )

    def __len__(self):
        return self.time.size

    def __getitem__(self, i) -> SurvivalRecord:
        return SurvivalRecord(float(self.time[i]), bool(self.event[i]), tuple(self.covariates[i].tolist()))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, SurvivalDataset):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.covariate_names == other.covariate_names
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and np.array_equal(self.covariates, other.covariates)
        )

    __hash__ = None

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def subset(self, index) -> "SurvivalDataset":
        """Dataset restricted to ``index`` (boolean mask or integer array), order preserved."""
        index = np.asarray(index)
        return SurvivalDataset(self.time[index], self.event[index], self.covariates[index],
                               self.mode, self.covariate_names)

    def truncate(self, t_end: float) -> "SurvivalDataset":
        """Administratively censor every observation still at risk after ``t_end``."""
        late = self.time > t_end
        time = np.where(late, t_end, self.time)
        event = self.event & ~late
        return SurvivalDataset(time, event, self.covariates, self.mode, self.covariate_names)


def _fail(lineno: int, msg: str):
    raise DataError(f"row {lineno}: {msg}")


def load_csv(path, mode: str = CONTINUOUS) -> SurvivalDataset:
    """Read a ``time,event,z0,z1,...`` CSV file.

    Errors name the offending line of the file (the header is line 1).
    """
    if mode not in MODES:
        raise DataError(f"unknown mode {mode!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty dataset") from None
        if len(header) < 2 or header[0] != "time" or header[1] != "event":
            raise DataError("header must start with columns 'time,event'")
        width = len(header)
        times, events, covs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                _fail(lineno, f"expected {width} fields, got {len(row)}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                _fail(lineno, "non-numeric field")
            t, e = values[0], values[1]
            if not math.isfinite(t) or t < 0:
                _fail(lineno, f"invalid time {row[0]!r}")
            if mode == DISCRETE and (t != round(t) or t < 1):
                _fail(lineno, f"discrete time must be a positive integer, got {row[0]!r}")
            if e not in (0.0, 1.0):
                _fail(lineno, f"event must be 0 or 1, got {row[1]!r}")
            times.append(t)
            events.append(e == 1.0)
            covs.append(values[2:])
    if not times:
        raise DataError("empty dataset")
    return SurvivalDataset(
        np.array(times), np.array(events, dtype=bool),
        np.array(covs, dtype=float).reshape(len(times), width - 2),
        mode, tuple(header[2:]),
    )


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def save_csv(data: SurvivalDataset, path) -> None:
    """Write ``data`` so that :func:`load_csv` reproduces it exactly."""
    if len(data) == 0:
        raise DataError("refusing to write an empty dataset")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "event", *data.covariate_names])
        for t, e, z in zip(data.time, data.event, data.covariates):
            # repr() round-trips doubles exactly (17 significant digits)
            writer.writerow([_fmt(t), int(e), *(_fmt(v) for v in z)])
