"""Gibbs samplers for the GRRN, GEE, GTT and GTTN models."""

import enum
from dataclasses import dataclass, field

import numpy as np

from ..model import FactorState, HyperParams, ObservedMatrix, PriorState
from . import _kernels as kern


class ModelKind(str, enum.Enum):
    GRRN = "GRRN"
    GEE = "GEE"
    GTT = "GTT"
    GTTN = "GTTN"
    NPNMF = "NPNMF"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper().replace("-", ""))
        except ValueError:
            raise ValueError(f"unknown model {name!r}; expected one of "
                             f"{[k.value for k in cls]}") from None


_KIND_CODE = {ModelKind.GRRN: kern.GRRN, ModelKind.GEE: kern.GEE,
              ModelKind.GTT: kern.GTT, ModelKind.GTTN: kern.GTTN}

_VAR_NAMES = {kern.VAR_FACTOR: "factor", kern.VAR_MU: "mu", kern.VAR_TAU: "tau",
              kern.VAR_LAMBDA: "lambda", kern.VAR_SIGMA2: "sigma2"}


class NumericalError(RuntimeError):
    """A conditional produced non-finite parameters."""

    def __init__(self, variable, indices, params):
        self.variable = variable
        self.indices = indices
        self.params = params
        super().__init__(f"non-finite conditional for {variable} at {indices}: "
                         f"parameters {params}")


@dataclass(frozen=True)
class RunConfig:
    kind: ModelKind = ModelKind.GRRN
    K: int = 10
    iterations: int = 500
    burn_in: int = 400
    seed: int = 0
    hyper: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if int(self.K) < 1:
            raise ValueError("K must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")


@dataclass
class RunTrace:
    """Per-iteration losses and the post-burn-in summaries of one run.

    ``posterior_mean`` averages ``W @ Z`` over the retained iterations.
    """

    kind: ModelKind
    train_mse: np.ndarray
    test_mse: np.ndarray | None
    sigma2: np.ndarray
    posterior_mean: np.ndarray
    n_samples: int
    train_mse_mean_of_samples: float
    test_mse_mean_of_samples: float
    train_mse_of_posterior_mean: float
    test_mse_of_posterior_mean: float
    hyper: HyperParams
    final_state: FactorState
    final_prior: PriorState | None = None
    degenerate_count: int = 0


class _Prepared:
    """Index arrays and work buffers for one (data, model) pair."""

    def __init__(self, data):
        if data.observed_count == 0:
            raise ValueError("training data has no observed entries")
        self.idx = kern.index_structure(data.mask, data.values)
        self.res = np.empty(data.observed_count)
        self.log = np.empty((0, 6))
        self.n_log = np.zeros(1, dtype=np.int64)
        self.diag_i = np.zeros(4, dtype=np.int64)
        self.diag_f = np.zeros(2)
        self.counters = np.zeros(1, dtype=np.int64)

    def residual(self, state):
        i = self.idx
        return kern.compute_residual(state.W, state.Z, i["row_ptr"], i["row_cols"],
                                     i["vals"], self.res)

    def sweep(self, kind, state, prior, hyper_arr, rng):
        i = self.idx
        s2 = np.array([state.sigma2])
        status = kern.sweep(_KIND_CODE[kind], state.W, state.Z, prior.mu_W, prior.tau_W,
                            prior.lambda_W, prior.mu_Z, prior.tau_Z, prior.lambda_Z, s2,
                            i["row_ptr"], i["row_cols"], i["col_ptr"], i["col_rows"],
                            i["col_pos"], i["vals"], self.res, hyper_arr, rng,
                            self.log, self.n_log, self.diag_i, self.diag_f,
                            self.counters)
        state.sigma2 = float(s2[0])
        if status != kern.STATUS_OK:
            var, side, a, b = (int(v) for v in self.diag_i)
            name = _VAR_NAMES[var]
            if var != kern.VAR_SIGMA2:
                name = f"{name}_{'W' if side == kern.SIDE_W else 'Z'}"
                indices = (a, b)
            else:
                indices = ()
            raise NumericalError(name, indices, tuple(float(v) for v in self.diag_f))


def _contiguous(state, prior):
    state.W = np.ascontiguousarray(state.W, dtype=float)
    state.Z = np.ascontiguousarray(state.Z, dtype=float)
    for f in ("mu_W", "tau_W", "lambda_W", "mu_Z", "tau_Z", "lambda_Z"):
        setattr(prior, f, np.ascontiguousarray(getattr(prior, f), dtype=float))


def init_state(kind, shape, K, hyper, rng):
    """Random initial state: hyperprior variables from their priors, factors
    from the priors they induce, sigma^2 from its prior.

    ``hyper`` must be resolved (``beta_lambda`` set).
    """
    kind = ModelKind.parse(kind)
    M, N = shape
    state = FactorState(np.zeros((M, K)), np.zeros((K, N)), 1.0)
    prior = PriorState.constant(M, N, K)
    s2 = np.zeros(1)
    kern.init_draws(_KIND_CODE[kind], state.W, state.Z, prior.mu_W, prior.tau_W,
                    prior.lambda_W, prior.mu_Z, prior.tau_Z, prior.lambda_Z, s2,
                    hyper.as_array(), rng)
    state.sigma2 = float(s2[0])
    return state, prior


def gibbs_sweep(kind, state, prior, data, hyper, rng, record=None):
    """Run one Gibbs iteration in place and return ``(state, prior)``.

    For GEE and GTT the prior state is ignored (their prior constants come from
    ``hyper``); GTTN ignores the ``lambda_*`` arrays. If ``record`` is an
    integer, the parameters of the first ``record`` conditionals drawn are
    returned as a third element: rows of (variable, side, i, j, p1, p2).
    """
    kind = ModelKind.parse(kind)
    if kind is ModelKind.NPNMF:
        raise ValueError("NPNMF is not a Gibbs sampler; use run_npnmf")
    if prior is None:
        prior = PriorState.constant(data.n_rows, data.n_cols, state.K)
    _contiguous(state, prior)
    prep = _Prepared(data)
    if record:
        prep.log = np.zeros((int(record), 6))
    prep.residual(state)
    prep.sweep(kind, state, prior, hyper.as_array(), rng)
    if record:
        return state, prior, prep.log[:prep.n_log[0]].copy()
    return state, prior


def _test_arrays(train, test):
    if test is None:
        return None
    if isinstance(test, ObservedMatrix):
        mask, values = test.mask, test.values
    else:
        mask, values = np.asarray(test, dtype=bool), train.values
    if mask.shape != train.shape:
        raise ValueError("test mask shape does not match training data")
    if np.any(mask & train.mask):
        raise ValueError("test cells overlap training cells")
    rows, cols = np.nonzero(mask)
    return rows.astype(np.int64), cols.astype(np.int64), values[rows, cols].astype(float)


def _mse_on(pred, cells):
    if cells is None or cells[0].size == 0:
        return float("nan")
    d = cells[2] - pred[cells[0], cells[1]]
    return float(d @ d / d.size)


def run_gibbs(config, train, test=None):
    """Fit one model by Gibbs sampling.

    ``test`` is an optional held-out set: either an :class:`ObservedMatrix`
    or a boolean mask whose targets are read from ``train.values``.
    """
    kind = config.kind
    if kind is ModelKind.NPNMF:
        from .npnmf import run_npnmf
        return run_npnmf(config, train, test)
    prep = _Prepared(train)
    hyper = config.hyper.resolve(train, config.K)
    hyper_arr = hyper.as_array()
    rng = np.random.default_rng(config.seed)
    state, prior = init_state(kind, train.shape, config.K, hyper, rng)
    test_cells = _test_arrays(train, test)
    has_test = test_cells is not None and test_cells[0].size > 0

    T = config.iterations
    train_mse = np.empty(T)
    test_mse = np.full(T, np.nan) if test_cells is not None else None
    sigma2 = np.empty(T)
    post_sum = np.zeros(train.shape)
    n_obs = train.observed_count

    prep.residual(state)
    for t in range(T):
        prep.sweep(kind, state, prior, hyper_arr, rng)
        train_mse[t] = float(prep.res @ prep.res) / n_obs
        sigma2[t] = state.sigma2
        if has_test:
            test_mse[t] = kern.mse_at(state.W, state.Z, *test_cells)
        if t >= config.burn_in:
            post_sum += state.W @ state.Z

    n_samples = T - config.burn_in
    post_mean = post_sum / n_samples
    obs = train.mask
    d = train.values[obs] - post_mean[obs]
    return RunTrace(
        kind=kind,
        train_mse=train_mse,
        test_mse=test_mse,
        sigma2=sigma2,
        posterior_mean=post_mean,
        n_samples=n_samples,
        train_mse_mean_of_samples=float(train_mse[config.burn_in:].mean()),
        test_mse_mean_of_samples=(float(test_mse[config.burn_in:].mean())
                                  if has_test else float("nan")),
        train_mse_of_posterior_mean=float(d @ d / d.size),
        test_mse_of_posterior_mean=_mse_on(post_mean, test_cells),
        hyper=hyper,
        final_state=state,
        final_prior=prior,
        degenerate_count=int(prep.counters[0]),
    )
