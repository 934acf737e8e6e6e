"""Reproduction runs: model selection among M0-M3 on M0 data, Kaplan-Meier
based scores on M4/M5, the ranking-loss comparison on M6 and curve data for
plotting."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .concordance import concordance
from .kaplan_meier import km_model
from .ranking import TrainConfig, cumulative_hazard_curves, group_mean_curves, train
from .risk import analytic_model, antolini_score, hazard_score, parse_selector
from .simulate import builtin_scenario, generate

TABLE1_MODELS = ("M0", "M1", "M2", "M3")
TABLE1_SCORES = ("hazard", "antolini", "surv@0.5", "surv@1.05", "quantile@0.5", "quantile@0.75")
TABLE2_SCORES = ("hazard", "antolini", "surv@0.5", "quantile@0.25", "quantile@0.5", "quantile@0.75")
EXPERIMENTS = ("table1", "table2", "deep_compare")

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "table1"  # table1, table2 or deep_compare
    replications: int = 100
    base_seed: int = 0
    out_dir: Path | None = None
    n: int | None = None
    bandwidth: float = 0.05
    jobs: int = 1
    scores: tuple[str, ...] | None = None
    train: TrainConfig | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# model selection on M0 ---------------------------------------------------


def _scenario_n(name, n):
    spec = builtin_scenario(name)
    if n is None:
        return spec
    sizes = [n // len(spec.group_sizes)] * len(spec.group_sizes)
    sizes[-1] += n - sum(sizes)
    return replace(spec, group_sizes=tuple(sizes))


def _table1_replication(args):
    seed, n, scores = args
    data = generate(_scenario_n("M0", n), seed)
    out = np.empty((len(scores), len(TABLE1_MODELS)))
    for k, name in enumerate(TABLE1_MODELS):
        model = analytic_model(builtin_scenario(name).hazards)
        for s, sel in enumerate(scores):
            out[s, k] = concordance(data, parse_selector(sel, model)).index
    return out


@dataclass
class Table1Result:
    indices: np.ndarray  # (replications, scores, models)
    scores: tuple[str, ...] = TABLE1_SCORES

    @property
    def mean_index(self) -> np.ndarray:
        return self.indices.mean(axis=0)

    @property
    def selection_count(self) -> np.ndarray:
        best = self.indices.max(axis=2, keepdims=True)
        return (self.indices == best).sum(axis=0)

    def as_dict(self) -> dict:
        return {
            "scores": list(self.scores),
            "models": list(TABLE1_MODELS),
            "mean_index": self.mean_index.tolist(),
            "selection_count": self.selection_count.tolist(),
            "replications": int(self.indices.shape[0]),
            "per_replication": self.indices.tolist(),
        }


def run_table1(cfg: ExperimentConfig) -> Table1Result:
    """Score the four candidate models on ``cfg.replications`` M0 data sets.

    Replication ``r`` uses seed ``base_seed + r``.
    """
    scores = tuple(cfg.scores or TABLE1_SCORES)
    args = [(cfg.base_seed + r, cfg.n, scores) for r in range(cfg.replications)]
    result = Table1Result(np.stack(_map(_table1_replication, args, cfg.jobs)), scores)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(result.as_dict(), out / "table1.json")
    return result


# Kaplan-Meier scores on M4 / M5 -------------------------------------------


def hazard_crossings(grid, haz0, haz1) -> list[float]:
    """Times where the sign of ``haz0 - haz1`` changes (exact zeros skipped)."""
    diff = np.asarray(haz0) - np.asarray(haz1)
    nz = np.nonzero(diff)[0]
    flips = np.nonzero(np.sign(diff[nz[1:]]) != np.sign(diff[nz[:-1]]))[0]
    return [float(0.5 * (grid[nz[k]] + grid[nz[k + 1]])) for k in flips]


def run_table2(cfg: ExperimentConfig) -> dict:
    """Kaplan-Meier based concordance on M4 (seed ``base_seed``) and M5 (``base_seed + 1``)."""
    scores = tuple(cfg.scores or TABLE2_SCORES)
    report = {"scores": list(scores), "bandwidth": cfg.bandwidth}
    out = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for offset, name in enumerate(("M4", "M5")):
        spec = builtin_scenario(name)
        if cfg.n is not None:
            spec = replace(spec, group_sizes=(cfg.n, cfg.n))
        data = generate(spec, cfg.base_seed + offset)
        model = km_model(data, 0, cfg.bandwidth, spec.censoring.admin_time)
        # scores exist only up to the trimmed window edge
        trimmed = data.truncate(model.window)
        values = [concordance(trimmed, parse_selector(sel, model)).index for sel in scores]
        c0, c1 = model.curves[0], model.curves[1]
        grid = c0.smoothed.grid
        report[name] = {
            "index": values,
            "report_end": model.window,
            "hazard_crossings": hazard_crossings(grid, c0.hazard_values, c1.hazard_values),
        }
        if out is not None:
            rows = []
            for g, curve in ((0, c0), (1, c1)):
                rows += [(g, repr(float(t)), repr(float(s)), repr(float(h)))
                         for t, s, h in zip(grid, curve.smoothed.values, curve.hazard_values)]
            _write_csv(out / f"km_curves_{name}.csv", ["group", "t", "survival_smoothed", "hazard_estimate"], rows)
    if out is not None:
        _dump_json(report, out / "table2.json")
    return report


# ranking-loss comparison ----------------------------------------------------


def run_deep_compare(cfg: ExperimentConfig) -> dict:
    """Train on M6 with both ranking losses and compare on the test split."""
    spec = builtin_scenario("M6")
    if cfg.n is not None:
        spec = replace(spec, group_sizes=(cfg.n // 2, cfg.n - cfg.n // 2))
    data = generate(spec, cfg.base_seed)
    base = cfg.train or TrainConfig()
    report = {"base_seed": cfg.base_seed, "models": {}}
    out = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    curve_rows = []
    for variant in ("td", "alpha"):
        tcfg = replace(base, ranking_variant=variant, seed=cfg.base_seed)
        result = train(data, tcfg)
        test = data.subset(result.split["test"])
        model = result.model
        means = group_mean_curves(model, test)
        final = result.log[-1]
        report["models"][variant] = {
            "test_C_td": concordance(test, antolini_score(model)).index,
            "test_C_alpha": concordance(test, hazard_score(model)).index,
            "best_epoch": result.best_epoch,
            "epochs": len(result.log),
            "final_loss": {"l0": final.l0, "l_rank": final.l_rank, "total": final.total},
            "group_mean_cumulative_hazard": {str(g): v.tolist() for g, v in means.items()},
            "group1_above_group0_through_8": bool((means[1][:8] > means[0][:8]).all()),
        }
        if out is not None:
            curves = cumulative_hazard_curves(model, test.covariates)
            groups = test.covariates[:, 0].astype(int)
            for i, (g, row) in enumerate(zip(groups, curves)):
                curve_rows += [(variant, i, g, t + 1, repr(float(v))) for t, v in enumerate(row)]
            for g, v in means.items():
                curve_rows += [(variant, "mean", g, t + 1, repr(float(x))) for t, x in enumerate(v)]
            _write_csv(out / f"train_log_{variant}.csv", ["epoch", "l0", "l_rank", "total", "val_index", "val_nll"],
                       [(e.epoch, repr(e.l0), repr(e.l_rank), repr(e.total), repr(e.val_index), repr(e.val_nll))
                        for e in result.log])
    m = report["models"]
    report["crossing_property"] = (m["alpha"]["group1_above_group0_through_8"]
                                   and not m["td"]["group1_above_group0_through_8"])
    if out is not None:
        _write_csv(out / "figure4_cumulative_hazard.csv",
                   ["variant", "individual", "group", "t", "cumulative_hazard"], curve_rows)
        _dump_json(report, out / "deep_compare.json")
    return report


# figures -------------------------------------------------------------------


def emit_figure1_data(path, t_max: float = 1.1, step: float = 0.01) -> None:
    """Hazard and cumulative hazard of M0-M3 for both groups on ``[0, t_max]``."""
    grid = np.arange(int(round(t_max / step)) + 1) * step
    rows = []
    for name in TABLE1_MODELS:
        spec = builtin_scenario(name)
        for g, h in spec.hazards.items():
            rows += [(name, g, repr(float(t)), repr(float(a)), repr(float(c)))
                     for t, a, c in zip(grid, h.hazard(grid), h.cumulative_hazard(grid))]
    _write_csv(path, ["model", "group", "t", "hazard", "cumulative_hazard"], rows)
