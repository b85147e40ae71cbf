"""Closed-form conditional posteriors, one variable at a time.

These are the readable counterparts of the compiled sweep: each returns the
parameters of the distribution a variable is drawn from. Sums over the data
run over observed cells only. Z-side functions reuse the W-side ones on the
transposed problem.
"""

import numpy as np

from ..distributions import (PARAM_FLOOR, GammaParams, GaussianParams,
                             InvGammaParams, TnParams)
from ..model import FactorState, ObservedMatrix, PriorState
from ._kernels import GEE_EPS


def _row_terms(state, data, m, k):
    """(sum_j z_kj^2, sum_j z_kj (a_mj - sum_{i != k} w_mi z_ij)) over the
    observed columns of row m."""
    cols = np.flatnonzero(data.mask[m])
    if cols.size == 0:
        return 0.0, 0.0
    Zc = state.Z[:, cols]
    zk = Zc[k]
    others = state.W[m] @ Zc - state.W[m, k] * zk
    return float(zk @ zk), float(zk @ (data.values[m, cols] - others))


def _transpose(state, prior, data):
    st = FactorState(state.Z.T, state.W.T, state.sigma2)
    pr = None
    if prior is not None:
        pr = PriorState(prior.mu_Z.T, prior.tau_Z.T, prior.lambda_Z.T,
                        prior.mu_W.T, prior.tau_W.T, prior.lambda_W.T)
    return st, pr, ObservedMatrix(data.values.T, data.mask.T)


def _tn(mean, var):
    return TnParams(mean, 1.0 / var)


def grrn_cond_w(state, prior, data, m, k):
    """TN conditional of ``w_mk`` under the rectified-normal prior."""
    s_zz, s_zr = _row_terms(state, data, m, k)
    sigma2 = state.sigma2
    tau = max(prior.tau_W[m, k], PARAM_FLOOR)
    lam = max(prior.lambda_W[m, k], PARAM_FLOOR)
    mu_prime = (tau * prior.mu_W[m, k] - lam) / tau
    var = sigma2 / (s_zz + tau * sigma2)
    return _tn((s_zr / sigma2 + tau * mu_prime) * var, var)


def grrn_cond_z(state, prior, data, k, n):
    return grrn_cond_w(*_transpose(state, prior, data), n, k)


def gttn_cond_w(state, prior, data, m, k):
    """GTTN factor conditional: the GRRN one with no exponential rectifier."""
    s_zz, s_zr = _row_terms(state, data, m, k)
    sigma2 = state.sigma2
    tau = max(prior.tau_W[m, k], PARAM_FLOOR)
    mu_prime = prior.mu_W[m, k]
    var = sigma2 / (s_zz + tau * sigma2)
    return _tn((s_zr / sigma2 + tau * mu_prime) * var, var)


def gttn_cond_z(state, prior, data, k, n):
    return gttn_cond_w(*_transpose(state, prior, data), n, k)


def gee_cond_w(state, data, m, k, hyper, lam=None):
    """TN conditional of ``w_mk`` under an exponential prior with rate
    ``hyper.gee_lambda`` (or ``lam``). An all-zero partner block leaves no
    likelihood curvature; its sum of squares is floored at ``GEE_EPS``."""
    lam = hyper.gee_lambda if lam is None else lam
    s_zz, s_zr = _row_terms(state, data, m, k)
    s_zz = max(s_zz, GEE_EPS)
    sigma2 = state.sigma2
    var = sigma2 / s_zz
    return _tn((-lam + s_zr / sigma2) * var, var)


def gee_cond_z(state, data, k, n, hyper, lam=None):
    return gee_cond_w(*_transpose(state, None, data)[::2], n, k, hyper, lam)


def gtt_cond_w(state, data, m, k, hyper, mu=None, tau=None):
    """TN conditional of ``w_mk`` under a fixed ``TN(mu, 1/tau)`` prior."""
    mu = hyper.gtt_mu if mu is None else mu
    tau = hyper.gtt_tau if tau is None else tau
    s_zz, s_zr = _row_terms(state, data, m, k)
    sigma2 = state.sigma2
    var = sigma2 / (s_zz + tau * sigma2)
    return _tn((s_zr / sigma2 + tau * mu) * var, var)


def gtt_cond_z(state, data, k, n, hyper, mu=None, tau=None):
    return gtt_cond_w(*_transpose(state, None, data)[::2], n, k, hyper, mu, tau)


def grrn_cond_mu(w, tau_w, hyper):
    """Gaussian conditional of a prior mean; it is not sign-restricted."""
    tau_w = max(tau_w, PARAM_FLOOR)
    t = tau_w + hyper.tau_mu
    return GaussianParams((tau_w * w + hyper.tau_mu * hyper.mu_mu) / t, t)


def grrn_cond_tau(w, mu_w, hyper):
    """Gamma (shape, rate) conditional of a prior precision."""
    return GammaParams(hyper.a + 0.5, hyper.b + 0.5 * (w - mu_w) ** 2)


def grrn_cond_lambda(w, hyper):
    """Gamma (shape, rate) conditional of a rectifier rate."""
    if w < 0:
        raise ValueError("factor entries are nonnegative")
    return GammaParams(hyper.alpha_lambda + 1.0, hyper.beta_lambda + w)


# GTTN shares the mean/precision hierarchy with GRRN.
gttn_cond_mu = grrn_cond_mu
gttn_cond_tau = grrn_cond_tau


def gttn_cond_mu_tau(w, mu_w, tau_w, hyper):
    return grrn_cond_mu(w, tau_w, hyper), grrn_cond_tau(w, mu_w, hyper)


def cond_sigma2(state, data, hyper):
    """Inverse-Gamma (shape, scale) conditional of the noise variance; counts
    and residuals cover observed cells only."""
    pred = state.W @ state.Z
    r = data.values[data.mask] - pred[data.mask]
    return InvGammaParams(0.5 * r.size + hyper.alpha_sigma,
                          0.5 * float(r @ r) + hyper.beta_sigma)
