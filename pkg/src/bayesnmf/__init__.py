"""Bayesian nonnegative matrix factorisation by Gibbs sampling.

The main entry points are :func:`bayesnmf.samplers.run_gibbs` for a single
chain and :mod:`bayesnmf.harness` for experiment sweeps.
"""

__version__ = "0.1.0"

from .distributions import (DomainError, GammaParams, GaussianParams, InvGammaParams,
                            RnParams, TnParams, rn_normalizer, sample_rn, sample_tn)
from .model import FactorState, HyperParams, ObservedMatrix, PriorState, masked_mse, predict
from .samplers import ModelKind, NumericalError, RunConfig, RunTrace, run_gibbs

__all__ = [
    "DomainError", "GammaParams", "GaussianParams", "InvGammaParams", "RnParams",
    "TnParams", "rn_normalizer", "sample_rn", "sample_tn", "FactorState",
    "HyperParams", "ObservedMatrix", "PriorState", "masked_mse", "predict",
    "ModelKind", "NumericalError", "RunConfig", "RunTrace", "run_gibbs",
]
