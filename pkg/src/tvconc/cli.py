"""Command line entry point ``tvconc``.

Every subcommand writes its result as JSON on stdout (or to files under
``--out-dir``); failures exit with status 1 and a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .concordance import concordance
from .dataset import MODES, load_csv, save_csv
from .experiments import (ExperimentConfig, emit_figure1_data, run_deep_compare, run_table1,
                          run_table2)
from .kaplan_meier import km_model
from .ranking import VARIANTS, DiscreteHazardModel, TrainConfig, train
from .risk import analytic_model, discrete_group_model, parse_selector
from .simulate import SCENARIOS, ScenarioSpec, builtin_scenario, generate


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default if suppress else 0, help="random seed")
    parser.add_argument("--out-dir", type=Path, default=default, help="directory for output files")
    parser.add_argument("--jobs", type=int, default=default if suppress else 1, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    p = argparse.ArgumentParser(prog="tvconc", description="Concordance for time-varying risk scores.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="generate a scenario data set")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=SCENARIOS)
    src.add_argument("--spec", type=Path, help="scenario JSON file")
    s.add_argument("--out", type=Path, required=True, help="output CSV")

    c = sub.add_parser("concordance", parents=[common], help="concordance index of a risk score")
    c.add_argument("--data", type=Path, required=True)
    c.add_argument("--mode", choices=MODES, default="continuous")
    c.add_argument("--risk", required=True,
                   help="hazard | antolini | surv@T0 | quantile@S | linpred:B0,B1,...")
    c.add_argument("--model", help="scenario name, scenario JSON, trained model JSON or 'km'")
    c.add_argument("--until", type=float, help="only events up to this time count")
    c.add_argument("--group-col", default="z0", help="grouping covariate for --model km")
    c.add_argument("--bandwidth", type=float, default=0.05)
    c.add_argument("--window-end", type=float)

    k = sub.add_parser("km", parents=[common], help="smoothed Kaplan-Meier curves per group")
    k.add_argument("--data", type=Path, required=True)
    k.add_argument("--mode", choices=MODES, default="continuous")
    k.add_argument("--group-col", default="z0")
    k.add_argument("--bandwidth", type=float, default=0.05)
    k.add_argument("--window-end", type=float)
    k.add_argument("--out-curves", type=Path, required=True)

    t = sub.add_parser("train", parents=[common], help="train the discrete hazard network")
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--variant", choices=VARIANTS, default="alpha")
    t.add_argument("--sigma", type=float, default=0.1)
    t.add_argument("--weight", type=float, default=1.0)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--max-epochs", type=int, default=200)
    t.add_argument("--patience", type=int, default=5)
    t.add_argument("--hidden", type=int, default=32)
    t.add_argument("--out", type=Path, required=True, help="model JSON")
    t.add_argument("--log", type=Path, help="per-epoch CSV log")

    r = sub.add_parser("reproduce", parents=[common], help="rerun an experiment")
    r.add_argument("experiment", choices=("table1", "table2", "deep"))
    r.add_argument("--replications", type=int, default=100)
    r.add_argument("--n", type=int, help="sample size override")
    r.add_argument("--bandwidth", type=float, default=0.05)
    r.add_argument("--scores", help="comma separated risk-score selectors")

    f = sub.add_parser("figures", parents=[common], help="write hazard curves of M0-M3")
    f.add_argument("--t-max", type=float, default=1.1)
    f.add_argument("--step", type=float, default=0.01)
    return p


def _column(data, name: str) -> int:
    if name in data.covariate_names:
        return data.covariate_names.index(name)
    if name.isdigit() and int(name) < data.n_covariates:
        return int(name)
    raise ValueError(f"unknown covariate column {name!r}")


def _scenario_model(spec: ScenarioSpec):
    if spec.mode == "discrete":
        return discrete_group_model(spec.hazards)
    return analytic_model(spec.hazards)


def load_model(ref: str | None, data, args):
    """Resolve ``--model``. Returns ``(model, data)``; KM models trim ``data``
    to the reported window so every event time can be scored."""
    if ref is None:
        return None, data
    if ref == "km":
        model = km_model(data, _column(data, args.group_col), args.bandwidth, args.window_end)
        return model, data.truncate(model.window)
    if ref in SCENARIOS:
        return _scenario_model(builtin_scenario(ref)), data
    path = Path(ref)
    if not path.is_file():
        raise ValueError(f"model {ref!r} is neither a scenario name, 'km' nor a file")
    content = json.loads(path.read_text())
    if "W1" in content:
        return DiscreteHazardModel.from_dict(content), data
    return _scenario_model(ScenarioSpec.from_dict(content)), data


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_simulate(args):
    spec = builtin_scenario(args.scenario) if args.scenario else ScenarioSpec.from_json(args.spec)
    data = generate(spec, args.seed)
    save_csv(data, args.out)
    _emit({"scenario": spec.name, "n": len(data), "events": int(data.event.sum()), "out": str(args.out)})


def _cmd_concordance(args):
    data = load_csv(args.data, args.mode)
    model, data = load_model(args.model, data, args)
    report = concordance(data, parse_selector(args.risk, model), until=args.until)
    out = report.as_dict()
    out["risk"] = args.risk
    _emit(out)


def _cmd_km(args):
    data = load_csv(args.data, args.mode)
    col = _column(data, args.group_col)
    model = km_model(data, col, args.bandwidth, args.window_end)
    with open(args.out_curves, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "t", "survival_smoothed", "hazard_estimate"])
        for g, curve in sorted(model.curves.items()):
            for t, s, h in zip(curve.smoothed.grid, curve.smoothed.values, curve.hazard_values):
                w.writerow([g, repr(float(t)), repr(float(s)), repr(float(h))])
    _emit({"groups": sorted(model.curves), "report_end": model.window, "out_curves": str(args.out_curves)})


def _cmd_train(args):
    data = load_csv(args.data, "discrete")
    cfg = TrainConfig(ranking_variant=args.variant, sigma=args.sigma, ranking_weight=args.weight,
                      learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.max_epochs,
                      patience=args.patience, seed=args.seed, hidden=args.hidden)
    result = train(data, cfg)
    result.model.save(args.out)
    if args.log is not None:
        rows = result.log_rows()
        with open(args.log, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    last = result.log[-1]
    _emit({"best_epoch": result.best_epoch, "epochs": len(result.log), "final_l0": last.l0,
           "final_l_rank": last.l_rank, "final_total": last.total, "out": str(args.out)})


def _cmd_reproduce(args):
    out_dir = args.out_dir or Path("results")
    scores = tuple(x.strip() for x in args.scores.split(",")) if args.scores else None
    name = "deep_compare" if args.experiment == "deep" else args.experiment
    cfg = ExperimentConfig(name, args.replications, args.seed, out_dir, args.n, args.bandwidth,
                           args.jobs, scores)
    if name == "table1":
        report = run_table1(cfg).as_dict()
        report.pop("per_replication")
    elif name == "table2":
        report = run_table2(cfg)
    else:
        report = run_deep_compare(cfg)
        for m in report["models"].values():
            m.pop("group_mean_cumulative_hazard")
    _emit(report)


def _cmd_figures(args):
    out_dir = args.out_dir or Path("results")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "figure1_hazards.csv"
    emit_figure1_data(path, args.t_max, args.step)
    _emit({"figure1": str(path)})


COMMANDS = {"simulate": _cmd_simulate, "concordance": _cmd_concordance, "km": _cmd_km,
            "train": _cmd_train, "reproduce": _cmd_reproduce, "figures": _cmd_figures}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        COMMANDS[args.command](args)
    except Exception as exc:  # reported as JSON, never as a traceback
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
