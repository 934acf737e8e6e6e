"""Right-censored data generation for the crossing-hazard scenarios M0-M6."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import CONTINUOUS, DISCRETE, SurvivalDataset
from .hazard import GroupHazardSpec, PiecewiseHazard

SCENARIOS = ("M0", "M1", "M2", "M3", "M4", "M5", "M6")


class DiscreteGroupHazard(Mapping):
    """Per-group table of discrete hazards ``P(X = t | X >= t)``, ``t = 1..K``."""

    def __init__(self, tables: Mapping[int, object]):
        if not tables:
            raise ValueError("at least one group required")
        parsed = {int(k): np.asarray(v, dtype=float) for k, v in sorted(tables.items())}
        lengths = {t.size for t in parsed.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("all hazard tables need the same non-zero length")
        for t in parsed.values():
            if ((t < 0) | (t > 1)).any():
                raise ValueError("discrete hazards must lie in [0, 1]")
            t.setflags(write=False)
        self._tables = parsed
        self.horizon = lengths.pop()

    def __getitem__(self, key):
        return self._tables[int(key)]

    def __iter__(self):
        return iter(self._tables)

    def __len__(self):
        return len(self._tables)

    def to_dict(self):
        return {str(k): v.tolist() for k, v in self._tables.items()}


@dataclass(frozen=True)
class CensoringSpec:
    """Independent exponential censoring at ``random_rate`` plus administrative
    censoring at ``admin_time``. ``random_rate = 0`` disables the former."""

    random_rate: float = 0.0
    admin_time: float = 1.0

    def __post_init__(self):
        if not (self.random_rate >= 0 and math.isfinite(self.random_rate)):
            raise ValueError("random_rate must be finite and non-negative")
        if not (math.isfinite(self.admin_time) and self.admin_time > 0):
            raise ValueError("admin_time must be finite and positive (finite observation window)")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    mode: str
    group_sizes: tuple[int, ...]
    hazards: object  # GroupHazardSpec (continuous) or DiscreteGroupHazard (discrete)
    censoring: CensoringSpec = field(default_factory=CensoringSpec)
    noise_covariates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(g) for g in self.group_sizes))
        if self.mode == CONTINUOUS:
            if not isinstance(self.hazards, GroupHazardSpec):
                raise ValueError("continuous scenario needs a GroupHazardSpec")
            if self.noise_covariates:
                raise ValueError("noise covariates are only supported for discrete scenarios")
        elif self.mode == DISCRETE:
            if not isinstance(self.hazards, DiscreteGroupHazard):
                raise ValueError("discrete scenario needs a DiscreteGroupHazard")
            if self.censoring.admin_time != int(self.censoring.admin_time):
                raise ValueError("discrete admin_time must be an integer")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        if sorted(self.hazards) != list(range(len(self.group_sizes))):
            raise ValueError("hazards must be keyed 0..G-1 with one group size per group")
        if any(g <= 0 for g in self.group_sizes):
            raise ValueError("group sizes must be positive")
        if self.noise_covariates < 0:
            raise ValueError("noise_covariates must be non-negative")

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "group_sizes": list(self.group_sizes),
            "hazards": self.hazards.to_dict(),
            "censoring": {"random_rate": self.censoring.random_rate,
                          "admin_time": self.censoring.admin_time},
            "noise_covariates": self.noise_covariates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        mode = d.get("mode", CONTINUOUS)
        hazards = (GroupHazardSpec.from_dict(d["hazards"]) if mode == CONTINUOUS
                   else DiscreteGroupHazard(
                       dict(enumerate(d["hazards"])) if isinstance(d["hazards"], list) else d["hazards"]))
        cens = d.get("censoring", {})
        return cls(
            name=d.get("name", "custom"),
            mode=mode,
            group_sizes=tuple(d["group_sizes"]),
            hazards=hazards,
            censoring=CensoringSpec(float(cens.get("random_rate", 0.0)), float(cens["admin_time"])),
            noise_covariates=int(d.get("noise_covariates", 0)),
        )

    @classmethod
    def from_json(cls, path) -> "ScenarioSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _pw(*pieces):
    return PiecewiseHazard.from_pieces(pieces)


INF = math.inf


def builtin_scenario(name: str) -> ScenarioSpec:
    """The seven scenarios of the crossing-hazard experiments."""
    name = name.upper()
    if name in ("M0", "M1", "M2", "M3"):
        group0 = {"M0": 0.5, "M1": 0.5, "M2": 0.25, "M3": 0.5}[name]
        group1 = {
            "M0": _pw((INF, 0.0, 1.0)),
            "M1": _pw((0.5, 0.0, 1.0), (INF, 0.0, 10.0)),
            "M2": _pw((INF, 0.0, 1.0)),
            "M3": _pw((INF, 0.0, 0.5)),
        }[name]
        hazards = GroupHazardSpec({0: PiecewiseHazard.constant(group0), 1: group1})
        return ScenarioSpec(name, CONTINUOUS, (1000, 1000), hazards, CensoringSpec(0.05, 1.1))
    if name == "M4":
        hazards = GroupHazardSpec({0: _pw((0.1, 6.0, 0.0), (INF, 1.0, 0.0)),
                                   1: PiecewiseHazard.constant(1.4)})
        return ScenarioSpec(name, CONTINUOUS, (2000, 2000), hazards, CensoringSpec(0.0, 1.05))
    if name == "M5":
        hazards = GroupHazardSpec({0: _pw((0.9, 0.5, 0.0), (INF, 10.0, 0.0)),
                                   1: _pw((0.9, 2.0, 0.0), (INF, 1.0, 0.0))})
        return ScenarioSpec(name, CONTINUOUS, (2000, 2000), hazards, CensoringSpec(0.0, 1.05))
    if name == "M6":
        hazards = DiscreteGroupHazard({0: [0.05] * 5 + [0.5] * 5, 1: [0.5] * 5 + [0.05] * 5})
        return ScenarioSpec(name, DISCRETE, (10000, 10000), hazards, CensoringSpec(0.0, 10), noise_covariates=9)
    raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")


def _discrete_times(table: np.ndarray, uniforms: np.ndarray):
    """First bin whose uniform falls below the hazard; ``K+1`` when none does."""
    hit = uniforms < table
    first = np.argmax(hit, axis=-1) + 1
    any_hit = hit.any(axis=-1)
    return np.where(any_hit, first, table.size + 1), any_hit


def sample_discrete_event(hazard_table, rng: np.random.Generator) -> tuple[int, bool]:
    """Sequential Bernoulli thinning over bins ``1..K``.

    Returns ``(t, True)`` for an event in bin ``t`` or ``(K, False)`` when the
    individual survives every bin.
    """
    table = np.asarray(hazard_table, dtype=float)
    t, hit = _discrete_times(table, rng.random(table.size))
    return (int(t), True) if hit else (table.size, False)


def generate(spec: ScenarioSpec, seed: int) -> SurvivalDataset:
    """Simulate ``T = min(X, U)``, ``D = 1(X <= U)`` for every individual.

    Random numbers are consumed row by row: each individual takes its event
    uniform(s), then one censoring uniform, then one uniform per noise
    covariate. Group ``g`` individuals are contiguous and carry ``z0 = g``.
    """
    rng = np.random.default_rng(seed)
    cens = spec.censoring
    n = spec.n
    n_event = 1 if spec.mode == CONTINUOUS else spec.hazards.horizon
    u = rng.random((n, n_event + 1 + spec.noise_covariates))
    group = np.repeat(np.arange(len(spec.group_sizes)), spec.group_sizes)
    x = np.empty(n)
    for g in spec.hazards:
        rows = group == g
        if spec.mode == CONTINUOUS:
            x[rows] = spec.hazards[g].quantile(1.0 - u[rows, 0])
        else:
            x[rows] = _discrete_times(spec.hazards[g], u[rows, :n_event])[0]
    if cens.random_rate > 0:
        c = -np.log1p(-u[:, n_event]) / cens.random_rate
        if spec.mode == DISCRETE:
            c = np.ceil(c)
        c = np.minimum(c, cens.admin_time)
    else:
        c = np.full(n, float(cens.admin_time))
    time = np.minimum(x, c)
    event = x <= c
    noise = (u[:, n_event + 1:] < 0.5).astype(float)
    cov = np.column_stack([group.astype(float), noise])
    names = ("z0",) + tuple(f"z{k}" for k in range(1, spec.noise_covariates + 1))
    return SurvivalDataset(time, event, cov, spec.mode, names)
