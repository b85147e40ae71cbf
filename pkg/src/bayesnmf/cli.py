"""Command-line entry point.

Commands: ``fit``, ``convergence``, ``noise``, ``sparsity``, ``validate-data``.
Settings come from an optional JSON config file, overridden by flags. Every
command writes CSV tables plus a ``manifest.json`` holding the fully
resolved configuration.

Exit codes: 0 success, 2 config/validation error, 3 I/O or parse error,
4 numerical failure.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (ParseError, RatingsFile, SplitSpec, clean_min_observed, load_ratings,
                   split_train_test)
from .harness import (AggregateRow, CellResult, ExperimentKind, ExperimentSpec,
                      run_experiment)
from .model import HyperParams
from .samplers import ModelKind, NumericalError, RunConfig, run_gibbs

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

COMMANDS = ("fit", "convergence", "noise", "sparsity", "validate-data")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "dataset": None,
    "format": "u.data",
    "clean_min": None,          # None: 3 for MovieLens formats, off for synthetic
    "models": ["GRRN"],
    "k": [10],
    "fractions": [],
    "noise": [],
    "iterations": 500,
    "burn_in": 400,
    "repeats": 10,
    "seed": 0,
    "hyper": {},
    "noise_test_fraction": 0.1,
    "workers": 1,
    "out": None,
}

RESULT_COLUMNS = (
    "experiment", "model", "K", "fraction_or_ratio", "repeat", "seed",
    "train_mse_mean_of_samples", "test_mse_of_posterior_mean", "diverged_flag",
    "test_mse_mean_of_samples", "train_mse_of_posterior_mean", "metric",
    "metric_clean", "status",
)

AGGREGATE_COLUMNS = tuple(f.name for f in dataclasses.fields(AggregateRow))


class ConfigError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_float(s):
    return float(s)


# ---------------------------------------------------------------------------
# configuration


def _split_list(values, cast):
    out = []
    for v in values or []:
        out += [cast(x) for x in str(v).split(",") if x.strip()]
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="bayesnmf", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--model", action="append", help="model name; repeatable or comma list")
    p.add_argument("--k", action="append", help="latent dimensions, comma list")
    p.add_argument("--fraction", action="append", help="fractions unobserved, comma list")
    p.add_argument("--noise", action="append", help="noise-to-signal ratios, comma list")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--format", choices=("u.data", "ratings.dat", "synthetic"))
    p.add_argument("--clean-min", type=int, dest="clean_min")
    p.add_argument("--hyper", action="append", metavar="NAME=VALUE",
                   help="hyperparameter override, e.g. beta_lambda=0.5")
    return p


def resolve_config(args):
    """Merge defaults < config file < flags and validate the result."""
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(DEFAULTS) - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if file_cfg.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {file_cfg['schema_version']!r}")
        cfg.update({k: v for k, v in file_cfg.items() if k != "command"})
    overrides = {
        "models": _split_list(args.model, str) or None,
        "k": _split_list(args.k, int) or None,
        "fractions": _split_list(args.fraction, float) or None,
        "noise": _split_list(args.noise, float) or None,
        "iterations": args.iterations, "burn_in": args.burn_in,
        "repeats": args.repeats, "seed": args.seed, "workers": args.workers,
        "out": str(args.out) if args.out else None,
        "dataset": str(args.dataset) if args.dataset else None,
        "format": args.format, "clean_min": args.clean_min,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    hyper = dict(cfg["hyper"])
    for item in args.hyper or []:
        name, _, value = item.partition("=")
        hyper[name.strip()] = float(value)
    cfg["hyper"] = hyper
    cfg["command"] = args.command
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg["dataset"] is None:
        raise ConfigError("a dataset path is required (--dataset)")
    if cfg["out"] is None and cfg["command"] != "validate-data":
        raise ConfigError("an output directory is required (--out)")
    try:
        cfg["models"] = [ModelKind.parse(m).value for m in cfg["models"]]
        RatingsFile(cfg["dataset"], cfg["format"])
        hyper_params(cfg)
        RunConfig(K=1, iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if not cfg["k"] or any(int(k) < 1 for k in cfg["k"]):
        raise ConfigError("K values must be >= 1")
    if int(cfg["repeats"]) < 1:
        raise ConfigError("repeats must be >= 1")
    if any(not 0 < f < 1 for f in cfg["fractions"]):
        raise ConfigError("fractions must lie in (0, 1)")
    if any(not (math.isfinite(r) and r >= 0) for r in cfg["noise"]):
        raise ConfigError("noise ratios must be nonnegative")
    if cfg["command"] == "sparsity" and not cfg["fractions"]:
        raise ConfigError("sparsity needs at least one --fraction")
    if cfg["command"] == "noise" and not cfg["noise"]:
        raise ConfigError("noise needs at least one --noise ratio")


def hyper_params(cfg):
    known = {f.name for f in dataclasses.fields(HyperParams)}
    unknown = sorted(set(cfg["hyper"]) - known)
    if unknown:
        raise ConfigError(f"unknown hyperparameters: {unknown}")
    return HyperParams(**cfg["hyper"])


def load_dataset(cfg):
    fmt = cfg["format"]
    data = load_ratings(RatingsFile(cfg["dataset"], fmt))
    clean_min = cfg["clean_min"]
    if clean_min is None:
        clean_min = 0 if fmt == "synthetic" else 3
    if clean_min > 0:
        data = clean_min_observed(data, clean_min)
    return data


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# table I/O


def write_trace(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "train_mse", "test_mse", "sigma2"))
        test = trace.test_mse if trace.test_mse is not None else [math.nan] * len(trace.train_mse)
        for t, (a, b, c) in enumerate(zip(trace.train_mse, test, trace.sigma2), 1):
            w.writerow((t, repr(float(a)), repr(float(b)), repr(float(c))))


def read_trace(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in
            ("train_mse", "test_mse", "sigma2")}


def write_matrix(path, matrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(matrix, dtype=float):
            w.writerow([repr(float(v)) for v in row])


def read_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def write_results(path, cells):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for c in cells:
            w.writerow([_fmt(v) for v in (
                c.experiment, c.model, c.K, c.level, c.repeat, c.seed,
                c.train_mse_mean_of_samples, c.test_mse_of_posterior_mean, c.diverged,
                c.test_mse_mean_of_samples, c.train_mse_of_posterior_mean, c.metric,
                c.metric_clean, c.status)])


def read_results(path):
    """Parse a results table back into :class:`CellResult` objects (without
    curves or timings)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for r in reader:
            out.append(CellResult(
                experiment=r["experiment"], model=r["model"], K=int(r["K"]),
                level=float(r["fraction_or_ratio"]), repeat=int(r["repeat"]),
                seed=int(r["seed"]),
                train_mse_mean_of_samples=float(r["train_mse_mean_of_samples"]),
                test_mse_mean_of_samples=float(r["test_mse_mean_of_samples"]),
                train_mse_of_posterior_mean=float(r["train_mse_of_posterior_mean"]),
                test_mse_of_posterior_mean=float(r["test_mse_of_posterior_mean"]),
                metric=float(r["metric"]), metric_clean=float(r["metric_clean"]),
                diverged=r["diverged_flag"] == "1", status=r["status"]))
    return out


def write_aggregate(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in AGGREGATE_COLUMNS])


def read_aggregate(path):
    types = {f.name: f.type for f in dataclasses.fields(AggregateRow)}
    with open(path, newline="", encoding="utf-8") as fh:
        return [AggregateRow(**{k: types[k](v) for k, v in r.items()})
                for r in csv.DictReader(fh)]


def write_timings(path, cells):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("experiment", "model", "K", "fraction_or_ratio", "repeat", "wall_seconds"))
        for c in cells:
            w.writerow([_fmt(v) for v in (c.experiment, c.model, c.K, c.level,
                                           c.repeat, c.wall_seconds)])


def write_curve(path, curve):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "train_mse"))
        for t, v in enumerate(curve, 1):
            w.writerow((t, repr(float(v))))


# ---------------------------------------------------------------------------
# commands


def _dataset_block(cfg, data):
    return {"path": cfg["dataset"], "format": cfg["format"],
            "sha256": sha256(cfg["dataset"]), "rows": data.n_rows,
            "cols": data.n_cols, "observed": data.observed_count}


def cmd_fit(cfg):
    data = load_dataset(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    train, test = data, None
    if cfg["fractions"]:
        train, test = split_train_test(data, SplitSpec(cfg["fractions"][0], cfg["seed"]))
    config = RunConfig(kind=cfg["models"][0], K=int(cfg["k"][0]),
                       iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]),
                       seed=int(cfg["seed"]), hyper=hyper_params(cfg))
    start = time.perf_counter()
    trace = run_gibbs(config, train, test)
    wall = time.perf_counter() - start
    write_trace(out / "trace.csv", trace)
    write_matrix(out / "prediction.csv", trace.posterior_mean)
    write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": "fit",
        "config": cfg,
        "seed": config.seed,
        "model": config.kind.value,
        "K": config.K,
        "resolved_hyperparameters": trace.hyper.to_dict(),
        "observed_mean": train.observed_mean(),
        "dataset": _dataset_block(cfg, data),
        "summary": {
            "train_mse_mean_of_samples": trace.train_mse_mean_of_samples,
            "train_mse_of_posterior_mean": trace.train_mse_of_posterior_mean,
            "test_mse_of_posterior_mean": trace.test_mse_of_posterior_mean,
            "test_mse_mean_of_samples": trace.test_mse_mean_of_samples,
            "degenerate_count": trace.degenerate_count,
        },
        "wall_seconds": wall,
    })
    return EXIT_OK


def cmd_experiment(cfg):
    kind = ExperimentKind(cfg["command"])
    data = load_dataset(cfg)
    levels = {ExperimentKind.CONVERGENCE: [0.0],
              ExperimentKind.SPARSITY: cfg["fractions"],
              ExperimentKind.NOISE: cfg["noise"]}[kind]
    spec = ExperimentSpec(kind=kind, models=tuple(cfg["models"]), K_values=tuple(cfg["k"]),
                          levels=tuple(levels), repeats=int(cfg["repeats"]),
                          iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]),
                          seed=int(cfg["seed"]), hyper=hyper_params(cfg),
                          noise_test_fraction=float(cfg["noise_test_fraction"]),
                          workers=int(cfg["workers"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = run_experiment(spec, data)
    wall = time.perf_counter() - start
    write_results(out / "results.csv", result.cells)
    write_aggregate(out / "aggregate.csv", result.aggregate())
    write_timings(out / "timings.csv", result.cells)
    if kind is ExperimentKind.CONVERGENCE:
        for (model, K), curve in result.curves().items():
            write_curve(out / f"curve_{model}_K{K}.csv", curve)
    m0 = data.observed_mean()
    write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": kind.value,
        "config": cfg,
        "dataset": _dataset_block(cfg, data),
        "observed_mean": m0,
        "beta_lambda_by_K": {str(K): spec.hyper.resolve(data, K).beta_lambda
                             for K in spec.K_values},
        "wall_seconds": wall,
    })
    hard = any(c.status.startswith("numerical") for c in result.cells)
    return EXIT_NUMERICAL if hard else EXIT_OK


def cmd_validate_data(cfg):
    data = load_dataset(cfg)
    summary = {"rows": data.n_rows, "cols": data.n_cols,
               "observed": data.observed_count,
               "fraction_observed": data.observed_fraction,
               "observed_mean": data.observed_mean()}
    print(json.dumps(summary, indent=2))
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "dataset_summary.json", summary)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not Path(cfg["dataset"]).is_file():
        print(f"I/O error: dataset not found: {cfg['dataset']}", file=sys.stderr)
        return EXIT_IO
    handler = {"fit": cmd_fit, "validate-data": cmd_validate_data}.get(
        cfg["command"], cmd_experiment)
    try:
        return handler(cfg)
    except (ParseError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
