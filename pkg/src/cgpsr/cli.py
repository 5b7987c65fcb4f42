"""Command-line interface: evolve fronts, evaluate them, fit the baseline.

Commands
--------
evolve CONFIG            multi-start evolution, writes front/runlog/report files
evaluate FRONT --data F  re-score a saved front on another dataset
baseline CONFIG          ordinary-least-squares reference model
validate-config CONFIG   parse and check a config without running

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, check_files_exist, parse_config
from .data import (
    ColumnSpec,
    DataError,
    Dataset,
    NumericalError,
    ScalingState,
    apply_scaling,
    fit_linear,
    fit_scaling,
    load_csv,
    metrics,
)
from .evolution import Individual, non_dominated_sort, multi_start
from .genotype import Genotype, params_from_dict, params_to_dict
from .loss import mse_loss, predictions

METRIC_NAMES = ("rmse", "mae", "over", "under", "precision")

_SUPERSCRIPT = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")


def sci(x: float, sig: int = 4) -> str:
    """Scientific notation like +2.267·10², `sig` significant digits."""
    if x == 0:
        return f"+{0:.{sig - 1}f}·10⁰"
    exp = int(np.floor(np.log10(abs(x))))
    mant = x / 10.0**exp
    if abs(round(mant, sig - 1)) >= 10.0:  # rounding overflow
        mant /= 10.0
        exp += 1
    sup = str(exp).translate(_SUPERSCRIPT)
    return f"{mant:+.{sig - 1}f}·10{sup}"


# -- front files -------------------------------------------------------------


def front_to_dict(result, cfg: RunConfig, scaling: ScalingState) -> dict:
    return {
        "seed": result.seed,
        "config_digest": cfg.digest(),
        "cgp": params_to_dict(cfg.cgp_params()),
        "columns": {
            "features": list(cfg.features),
            "target": cfg.target,
            "lower_bound": cfg.lower_bound,
            "upper_bound": cfg.upper_bound,
        },
        "scaling": scaling.to_dict(),
        "members": [
            {
                "genes": [int(v) for v in m.genotype.genes],
                "constants": [float(c) for c in m.genotype.constants],
                "infix": m.expression,
                "loss": m.loss,
                "complexity": m.complexity,
            }
            for m in result.front.members
        ],
    }


def load_front(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            front = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open front file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"front file {path} is not valid JSON: {exc}") from exc
    for key in ("cgp", "columns", "members", "scaling"):
        if key not in front:
            raise DataError(f"front file {path} lacks the {key!r} entry")
    return front


def _front_specs(front: dict) -> list[ColumnSpec]:
    cols = front["columns"]
    specs = [ColumnSpec(name) for name in cols["features"]]
    specs.append(ColumnSpec(cols["target"], "target"))
    if cols.get("lower_bound"):
        specs.append(ColumnSpec(cols["lower_bound"], "lower_bound"))
    if cols.get("upper_bound"):
        specs.append(ColumnSpec(cols["upper_bound"], "upper_bound"))
    return specs


# -- commands ----------------------------------------------------------------


def cmd_evolve(args) -> int:
    cfg = parse_config(args.config)
    check_files_exist(cfg)
    specs = cfg.column_specs()
    train = load_csv(cfg.train, specs)
    scaling = fit_scaling(train, specs)
    train = apply_scaling(train, scaling)
    result = multi_start(
        train, cfg.evolution_config(), cfg.n_starts, parallelism=cfg.parallelism
    )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for run_result in result.runs:
        front_path = out / f"front_seed{run_result.seed}.json"
        with open(front_path, "w", encoding="utf-8") as fh:
            json.dump(front_to_dict(run_result, cfg, scaling), fh, indent=2)
            fh.write("\n")
        with open(out / f"runlog_seed{run_result.seed}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_loss", "front_size"])
            for entry in run_result.log:
                writer.writerow([entry.generation, repr(entry.best_loss), entry.front_size])
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "complexity", "loss", "expression"])
        for run_result in result.runs:
            for m in run_result.front.members:
                writer.writerow([run_result.seed, m.complexity, repr(m.loss), m.expression])
    print(f"{'seed':>8}  {'best_loss':>14}  {'front_size':>10}")
    for i, run_result in enumerate(result.runs):
        marker = "*" if i == result.best_index else " "
        print(
            f"{run_result.seed:>7}{marker}  {run_result.front.best_loss:>14.6g}  "
            f"{len(run_result.front):>10}"
        )
    best = result.best_run
    print(
        f"best run: seed {best.seed} "
        f"(lowest training loss {best.front.best_loss:.6g}), artifacts in {out}"
    )
    return 0


def _parse_metric_list(raw: str) -> list[str]:
    names = [m.strip() for m in raw.split(",") if m.strip()]
    if not names:
        raise ConfigError("empty metric set; choose from " + ", ".join(METRIC_NAMES))
    unknown = [m for m in names if m not in METRIC_NAMES]
    if unknown:
        raise ConfigError(f"unknown metrics {unknown}; choose from {METRIC_NAMES}")
    return names


def cmd_evaluate(args) -> int:
    wanted = _parse_metric_list(args.metrics)
    front = load_front(args.front)
    params = params_from_dict(front["cgp"])
    specs = _front_specs(front)
    data = load_csv(args.data, specs)
    if data.n_features != params.n_features:
        raise DataError(
            f"front expects {params.n_features} features, dataset has {data.n_features}"
        )
    data = apply_scaling(data, ScalingState.from_dict(front["scaling"]))
    if "precision" in wanted and data.lower_bounds is None:
        raise DataError("precision metric requires lower/upper bound columns")

    rows = []
    scored: list[Individual] = []
    for member in front["members"]:
        genotype = Genotype(member["genes"], member["constants"])
        pred = predictions(genotype, params, data)
        test_loss = mse_loss(genotype, params, data)
        if np.all(np.isfinite(pred)):
            report = metrics(pred, data)
        else:
            report = None  # metrics meaningless; shown as nan
        scored.append(
            Individual(
                genotype,
                test_loss if np.isfinite(test_loss) else float("inf"),
                int(member["complexity"]),
            )
        )
        row = {
            "complexity": member["complexity"],
            "train_loss": member["loss"],
            "infix": member["infix"],
        }
        for name in wanted:
            if report is None:
                row[name] = float("nan")
            elif name == "rmse":
                row[name] = report.rmse
            elif name == "mae":
                row[name] = report.mae
            elif name == "over":
                row[name] = report.avg_overestimate
            elif name == "under":
                row[name] = report.avg_underestimate
            elif name == "precision":
                row[name] = report.precision
        rows.append(row)

    on_front = set(non_dominated_sort(scored)[0]) if scored else set()
    header = ["complexity", "train_loss"] + wanted + ["test_front", "expression"]
    print("  ".join(f"{h:>12}" for h in header[:-1]) + "  expression")
    for i, row in enumerate(rows):
        cells = [f"{row['complexity']:>12}", f"{row['train_loss']:>12.6g}"]
        cells += [f"{row[name]:>12.6g}" for name in wanted]
        cells.append(f"{'yes' if i in on_front else 'no':>12}")
        print("  ".join(cells) + f"  {row['infix']}")
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, row in enumerate(rows):
                writer.writerow(
                    [row["complexity"], repr(row["train_loss"])]
                    + [repr(float(row[name])) for name in wanted]
                    + ["yes" if i in on_front else "no", row["infix"]]
                )
    return 0


def cmd_baseline(args) -> int:
    cfg = parse_config(args.config)
    check_files_exist(cfg)
    specs = cfg.column_specs()
    train = load_csv(cfg.train, specs)
    scaling = fit_scaling(train, specs)
    train_scaled = apply_scaling(train, scaling)
    model = fit_linear(train_scaled)
    print("coefficients (ordinary least squares):")
    for name, coef in zip(train.feature_names, model.coefficients):
        print(f"  {name:>16}  {sci(coef)}")
    print(f"  {'intercept':>16}  {sci(model.intercept)}")
    print()
    print(f"{'dataset':>8}  {'RMSE':>10}  {'avg.over':>10}  {'avg.under':>10}")

    def show(label: str, data: Dataset) -> None:
        report = metrics(model.predict(data), data)
        print(
            f"{label:>8}  {report.rmse:>10.4g}  {report.avg_overestimate:>10.4g}  "
            f"{report.avg_underestimate:>10.4g}"
        )

    show("train", train_scaled)
    if cfg.test is not None:
        test = apply_scaling(load_csv(cfg.test, specs), scaling)
        show("test", test)
    return 0


def cmd_validate_config(args) -> int:
    cfg = parse_config(args.config)
    check_files_exist(cfg)
    print(f"config ok (digest {cfg.digest()})")
    print(f"  features: {', '.join(cfg.features)}")
    print(f"  target: {cfg.target}")
    scaled = [f"{f}:{cfg.scaling_of(f)}" for f in cfg.features if cfg.scaling_of(f) != "none"]
    if scaled:
        print(f"  scaling: {', '.join(scaled)}")
    print(
        f"  grid: {cfg.rows}x{cfg.columns} (levels back {cfg.levels_back or cfg.columns}), "
        f"kernels {', '.join(cfg.kernels)}, {cfg.n_constants} constants"
    )
    print(
        f"  budget: {cfg.n_starts} start(s) x {cfg.generations} generations, "
        f"population {cfg.population_size}, seed {cfg.seed}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgpsr",
        description="Symbolic regression over tabular data: evolve, evaluate, baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run multi-start evolution from a config file")
    p.add_argument("config", help="path to a key=value run config")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("evaluate", help="re-score a saved front on a dataset")
    p.add_argument("front", help="front JSON produced by evolve")
    p.add_argument("--data", required=True, help="CSV to evaluate on")
    p.add_argument(
        "--metrics",
        default="rmse,mae,over,under",
        help=f"comma list from {{{','.join(METRIC_NAMES)}}}",
    )
    p.add_argument("--output", default=None, help="also write the table to this CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="ordinary-least-squares reference model")
    p.add_argument("config", help="path to a key=value run config")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("validate-config", help="check a config file without running")
    p.add_argument("config", help="path to a key=value run config")
    p.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
