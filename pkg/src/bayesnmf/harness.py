"""Experiment sweeps: convergence curves, noise sensitivity, held-out
prediction under increasing sparsity.

Every (model, K, level, repeat) cell is an independent job whose seeds are
derived from the base seed and the cell coordinates, so any cell can be rerun
in isolation and the aggregate does not depend on execution order.
"""

import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SplitSpec, add_noise, holdout_split, split_train_test
from .model import HyperParams
from .samplers import ModelKind, NumericalError, RunConfig, run_gibbs

DIVERGENCE_THRESHOLD = 1e6

NOISE_LADDER = (0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


class ExperimentKind(str, enum.Enum):
    CONVERGENCE = "convergence"
    NOISE = "noise"
    SPARSITY = "sparsity"


_MODEL_CODE = {k: i for i, k in enumerate(ModelKind)}
_EXPERIMENT_CODE = {k: i for i, k in enumerate(ExperimentKind)}


def cell_seed(base_seed, *coords):
    """Deterministic 63-bit seed from a base seed and integer coordinates."""
    ss = np.random.SeedSequence([int(base_seed) & (2**63 - 1), *map(int, coords)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _level_code(level):
    return int(round(level * 1_000_000))


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    models: tuple = (ModelKind.GRRN,)
    K_values: tuple = (10,)
    levels: tuple = (0.0,)
    repeats: int = 10
    iterations: int = 500
    burn_in: int = 400
    seed: int = 0
    hyper: HyperParams = field(default_factory=HyperParams)
    noise_test_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        object.__setattr__(self, "models", tuple(ModelKind.parse(m) for m in self.models))
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.models or not self.K_values or not self.levels:
            raise ValueError("models, K values and levels must be nonempty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if any(k < 1 for k in self.K_values):
            raise ValueError("K values must be >= 1")
        RunConfig(K=1, iterations=self.iterations, burn_in=self.burn_in)


@dataclass(frozen=True)
class CellResult:
    """Summary of one run. ``test_*`` are NaN when there is no held-out set."""

    experiment: str
    model: str
    K: int
    level: float
    repeat: int
    seed: int
    train_mse_mean_of_samples: float
    test_mse_mean_of_samples: float
    train_mse_of_posterior_mean: float
    test_mse_of_posterior_mean: float
    metric: float
    metric_clean: float
    diverged: bool
    status: str
    wall_seconds: float = field(default=0.0, compare=False)
    curve: tuple = field(default=(), repr=False)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    cells: list

    def aggregate(self):
        return aggregate(self.cells)

    def curves(self):
        """Mean train-MSE curve per (model, K) over repeats and levels."""
        groups = {}
        for c in self.cells:
            if c.curve:
                groups.setdefault((c.model, c.K), []).append(c.curve)
        return {key: np.mean(np.asarray(v, dtype=float), axis=0)
                for key, v in sorted(groups.items())}

    def cell(self, model, K, level, repeat=None):
        out = [c for c in self.cells if c.model == ModelKind.parse(model).value
               and c.K == K and math.isclose(c.level, level)
               and (repeat is None or c.repeat == repeat)]
        return out


@dataclass(frozen=True)
class AggregateRow:
    experiment: str
    model: str
    K: int
    level: float
    n: int
    n_diverged: int
    train_mse_mean: float
    train_mse_std: float
    test_mse_mean: float
    test_mse_std: float
    metric_mean: float
    metric_std: float


def _mean_std(xs):
    xs = np.asarray([x for x in xs if math.isfinite(x)], dtype=float)
    if xs.size == 0:
        return math.nan, math.nan
    return float(xs.mean()), float(xs.std())


def aggregate(cells):
    """Mean and standard deviation across repeats for every cell key."""
    groups = {}
    for c in cells:
        groups.setdefault((c.experiment, c.model, c.K, c.level), []).append(c)
    rows = []
    for key in sorted(groups):
        cs = sorted(groups[key], key=lambda c: c.repeat)
        tr = _mean_std([c.train_mse_mean_of_samples for c in cs])
        te = _mean_std([c.test_mse_of_posterior_mean for c in cs])
        me = _mean_std([c.metric for c in cs])
        rows.append(AggregateRow(*key, len(cs), sum(c.diverged for c in cs),
                                 *tr, *te, *me))
    return rows


# ---------------------------------------------------------------------------
# cell jobs


def _summarize(spec, model, K, level, repeat, seed, trace, metric, metric_clean,
               wall, status="ok"):
    test = trace.test_mse_of_posterior_mean
    diverged = (not math.isfinite(trace.train_mse_of_posterior_mean)
                or (math.isfinite(test) and test > DIVERGENCE_THRESHOLD))
    return CellResult(
        experiment=spec.kind.value, model=model.value, K=K, level=level,
        repeat=repeat, seed=seed,
        train_mse_mean_of_samples=trace.train_mse_mean_of_samples,
        test_mse_mean_of_samples=trace.test_mse_mean_of_samples,
        train_mse_of_posterior_mean=trace.train_mse_of_posterior_mean,
        test_mse_of_posterior_mean=test,
        metric=metric, metric_clean=metric_clean,
        diverged=bool(diverged or not math.isfinite(trace.train_mse[-1])),
        status=status, wall_seconds=wall,
        curve=tuple(float(v) for v in trace.train_mse)
        if spec.kind is ExperimentKind.CONVERGENCE else ())


def _failed(spec, model, K, level, repeat, seed, status):
    nan = math.nan
    return CellResult(spec.kind.value, model.value, K, level, repeat, seed,
                      nan, nan, nan, nan, nan, nan, True, status)


def run_cell(spec, data, model, K, level, repeat):
    """Run one cell of an experiment and summarize it."""
    seed = cell_seed(spec.seed, _EXPERIMENT_CODE[spec.kind], _MODEL_CODE[model], K,
                     _level_code(level), repeat)
    config = RunConfig(kind=model, K=K, iterations=spec.iterations,
                       burn_in=spec.burn_in, seed=seed, hyper=spec.hyper)
    # data-side randomness is shared by all models and K at a given level/repeat
    data_seed = cell_seed(spec.seed, _EXPERIMENT_CODE[spec.kind], _level_code(level),
                          repeat)
    start = time.perf_counter()
    metric = metric_clean = math.nan
    try:
        if spec.kind is ExperimentKind.CONVERGENCE:
            trace = run_gibbs(config, data)
        elif spec.kind is ExperimentKind.SPARSITY:
            train, test = split_train_test(data, SplitSpec(level, data_seed))
            if test.observed_count == 0:
                return _failed(spec, model, K, level, repeat, seed, "no-test-data")
            trace = run_gibbs(config, train, test)
        else:
            noisy = add_noise(data, level, data_seed)
            train, test = holdout_split(noisy, spec.noise_test_fraction, data_seed + 1)
            trace = run_gibbs(config, train, test)
            metric = noise_metric(noisy.values[test.mask],
                                  trace.posterior_mean[test.mask],
                                  noisy.values[noisy.mask])
            metric_clean = noise_metric(data.values[test.mask],
                                        trace.posterior_mean[test.mask],
                                        data.values[data.mask])
    except NumericalError as exc:
        return _failed(spec, model, K, level, repeat, seed, f"numerical: {exc}")
    except ValueError as exc:
        return _failed(spec, model, K, level, repeat, seed, f"infeasible: {exc}")
    wall = time.perf_counter() - start
    return _summarize(spec, model, K, level, repeat, seed, trace, metric,
                      metric_clean, wall)


def noise_metric(targets, predictions, reference_values):
    """Variance of the data divided by the prediction MSE (higher is better)."""
    targets = np.asarray(targets, dtype=float)
    d = targets - np.asarray(predictions, dtype=float)
    mse = float(d @ d / d.size) if d.size else math.nan
    return float(np.var(reference_values)) / mse if mse > 0 else math.inf


def _cells(spec):
    return [(m, K, lv, r) for m in spec.models for K in spec.K_values
            for lv in spec.levels for r in range(spec.repeats)]


def run_experiment(spec, data):
    """Run every cell of ``spec`` on ``data``; ``spec.workers > 1`` uses a
    process pool."""
    jobs = _cells(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(run_cell, spec, data, *job) for job in jobs]
            cells = [f.result() for f in futures]
    else:
        cells = [run_cell(spec, data, *job) for job in jobs]
    return ExperimentResult(spec, cells)


def run_convergence(spec, data):
    spec = replace(spec, kind=ExperimentKind.CONVERGENCE, levels=(0.0,))
    return run_experiment(spec, data)


def run_noise(spec, data):
    return run_experiment(replace(spec, kind=ExperimentKind.NOISE), data)


def run_sparsity(spec, data):
    return run_experiment(replace(spec, kind=ExperimentKind.SPARSITY), data)
