"""Non-probabilistic NMF baseline: mask-weighted multiplicative updates."""

import numpy as np

from ..distributions import DomainError
from ..model import FactorState
from .gibbs import ModelKind, RunTrace, _mse_on, _test_arrays

EPS = 1e-9


def npnmf_step(W, Z, A, mask):
    """One multiplicative update of W then Z for the masked Frobenius loss.

    ``A`` must be zero at unobserved cells. Nonnegative inputs stay
    nonnegative and exact zeros stay zero.
    """
    Mf = mask.astype(float)
    W = W * ((A @ Z.T) / ((Mf * (W @ Z)) @ Z.T + EPS))
    Z = Z * ((W.T @ A) / (W.T @ (Mf * (W @ Z)) + EPS))
    return W, Z


def run_npnmf(config, train, test=None):
    obs = train.values[train.mask]
    if obs.size == 0:
        raise ValueError("training data has no observed entries")
    if np.any(obs < 0):
        raise DomainError("multiplicative updates need nonnegative observed values")
    rng = np.random.default_rng(config.seed)
    M, N = train.shape
    K = config.K
    scale = 2.0 * np.sqrt(max(obs.mean(), EPS) / K)
    W = rng.uniform(0.0, scale, size=(M, K))
    Z = rng.uniform(0.0, scale, size=(K, N))
    A = np.where(train.mask, train.values, 0.0)
    test_cells = _test_arrays(train, test)
    has_test = test_cells is not None and test_cells[0].size > 0

    T = config.iterations
    train_mse = np.empty(T)
    test_mse = np.full(T, np.nan) if test_cells is not None else None
    for t in range(T):
        W, Z = npnmf_step(W, Z, A, train.mask)
        pred = W @ Z
        d = obs - pred[train.mask]
        train_mse[t] = float(d @ d / d.size)
        if has_test:
            test_mse[t] = _mse_on(pred, test_cells)

    pred = W @ Z
    return RunTrace(
        kind=ModelKind.NPNMF,
        train_mse=train_mse,
        test_mse=test_mse,
        sigma2=np.full(T, np.nan),
        posterior_mean=pred,
        n_samples=1,
        train_mse_mean_of_samples=float(train_mse[config.burn_in:].mean()),
        test_mse_mean_of_samples=(float(test_mse[config.burn_in:].mean())
                                  if has_test else float("nan")),
        train_mse_of_posterior_mean=float(train_mse[-1]),
        test_mse_of_posterior_mean=_mse_on(pred, test_cells),
        hyper=config.hyper,
        final_state=FactorState(W, Z, float("nan")),
    )
