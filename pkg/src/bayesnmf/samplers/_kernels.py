"""Compiled Gibbs sweep and helpers.

Observed cells are stored twice: in row order (``row_ptr``/``row_cols``,
positions ``p`` index ``vals`` and ``res``) and in column order
(``col_ptr``/``col_rows``/``col_pos``, where ``col_pos`` maps back to the
row-order position). ``res`` caches ``A - W Z`` on observed cells and is
updated after every scalar draw, so a sweep costs O(|observed| K).
"""

import math

import numba
import numpy as np

from ..distributions import PARAM_FLOOR, gamma_draw, inv_gamma_draw, tn_draw

GRRN, GEE, GTT, GTTN = 0, 1, 2, 3

SIDE_W, SIDE_Z = 0, 1
VAR_FACTOR, VAR_MU, VAR_TAU, VAR_LAMBDA, VAR_SIGMA2 = 0, 1, 2, 3, 4

GEE_EPS = 1e-12

# hyper array layout
H_ALPHA_SIGMA, H_BETA_SIGMA, H_MU_MU, H_TAU_MU, H_A, H_B = 0, 1, 2, 3, 4, 5
H_ALPHA_LAMBDA, H_BETA_LAMBDA, H_GEE_LAMBDA, H_GTT_MU, H_GTT_TAU = 6, 7, 8, 9, 10

STATUS_OK, STATUS_NUMERICAL = 0, 1


@numba.njit(cache=True)
def compute_residual(W, Z, row_ptr, row_cols, vals, res):
    M, K = W.shape
    rss = 0.0
    for m in range(M):
        for p in range(row_ptr[m], row_ptr[m + 1]):
            j = row_cols[p]
            s = 0.0
            for k in range(K):
                s += W[m, k] * Z[k, j]
            r = vals[p] - s
            res[p] = r
            rss += r * r
    return rss


@numba.njit(cache=True)
def mse_at(W, Z, rows, cols, vals):
    n = rows.shape[0]
    if n == 0:
        return math.nan
    K = W.shape[1]
    total = 0.0
    for t in range(n):
        s = 0.0
        for k in range(K):
            s += W[rows[t], k] * Z[k, cols[t]]
        d = vals[t] - s
        total += d * d
    return total / n


@numba.njit(cache=True)
def factor_conditional(kind, s_zz, s_zr, sigma2, mu, tau, lam, hyper, counters):
    """Parent mean and parent variance of a factor entry's TN conditional.

    ``s_zz`` is the sum of squared partner factors over the observed cells,
    ``s_zr`` the sum of partner factor times the residual that excludes this
    entry's own contribution.
    """
    if kind == GEE:
        if s_zz < GEE_EPS:
            s_zz = GEE_EPS
            counters[0] += 1
        var = sigma2 / s_zz
        mean = (-hyper[H_GEE_LAMBDA] + s_zr / sigma2) * var
        return mean, var
    if kind == GTT:
        tau = hyper[H_GTT_TAU]
        mu_prime = hyper[H_GTT_MU]
    else:
        if tau < PARAM_FLOOR:
            tau = PARAM_FLOOR
        if kind == GRRN:
            if lam < PARAM_FLOOR:
                lam = PARAM_FLOOR
            mu_prime = (tau * mu - lam) / tau
        else:
            mu_prime = mu
    var = sigma2 / (s_zz + tau * sigma2)
    mean = (s_zr / sigma2 + tau * mu_prime) * var
    return mean, var


@numba.njit(cache=True)
def _log(log, n_log, var, side, i, j, p1, p2):
    if n_log[0] < log.shape[0]:
        r = n_log[0]
        log[r, 0] = var
        log[r, 1] = side
        log[r, 2] = i
        log[r, 3] = j
        log[r, 4] = p1
        log[r, 5] = p2
        n_log[0] += 1


@numba.njit(cache=True)
def _fail(diag_i, diag_f, var, side, i, j, p1, p2):
    diag_i[0] = var
    diag_i[1] = side
    diag_i[2] = i
    diag_i[3] = j
    diag_f[0] = p1
    diag_f[1] = p2
    return STATUS_NUMERICAL


@numba.njit(cache=True)
def _hyper_update(kind, x, side, i, j, MU, TAU, LAM, hyper, rng, log, n_log,
                  diag_i, diag_f):
    tau = TAU[i, j]
    if tau < PARAM_FLOOR:
        tau = PARAM_FLOOR
    t_post = tau + hyper[H_TAU_MU]
    m_post = (tau * x + hyper[H_TAU_MU] * hyper[H_MU_MU]) / t_post
    _log(log, n_log, VAR_MU, side, i, j, m_post, t_post)
    if not (math.isfinite(m_post) and math.isfinite(t_post)):
        return _fail(diag_i, diag_f, VAR_MU, side, i, j, m_post, t_post)
    mu_new = m_post + rng.standard_normal() / math.sqrt(t_post)
    MU[i, j] = mu_new

    shape = hyper[H_A] + 0.5
    d = x - mu_new
    rate = hyper[H_B] + 0.5 * d * d
    _log(log, n_log, VAR_TAU, side, i, j, shape, rate)
    if not (math.isfinite(rate) and rate > 0.0):
        return _fail(diag_i, diag_f, VAR_TAU, side, i, j, shape, rate)
    TAU[i, j] = gamma_draw(shape, rate, rng)

    if kind == GRRN:
        shape = hyper[H_ALPHA_LAMBDA] + 1.0
        rate = hyper[H_BETA_LAMBDA] + x
        _log(log, n_log, VAR_LAMBDA, side, i, j, shape, rate)
        if not (math.isfinite(rate) and rate > 0.0):
            return _fail(diag_i, diag_f, VAR_LAMBDA, side, i, j, shape, rate)
        LAM[i, j] = gamma_draw(shape, rate, rng)
    return STATUS_OK


@numba.njit(cache=True)
def sweep(kind, W, Z, muW, tauW, lamW, muZ, tauZ, lamZ, sigma2,
          row_ptr, row_cols, col_ptr, col_rows, col_pos, vals, res,
          hyper, rng, log, n_log, diag_i, diag_f, counters):
    """One full Gibbs iteration in the fixed order: for each k, every w_mk
    (with its hyperprior variables), then every z_kn; then sigma^2.

    ``res`` must hold the current residual on entry; it is exact on exit.
    ``sigma2`` is a length-1 array. Returns a status code; on failure
    ``diag_i``/``diag_f`` identify the variable and its parameters.
    """
    M, K = W.shape
    N = Z.shape[1]
    hier = kind == GRRN or kind == GTTN
    s2 = sigma2[0]
    for k in range(K):
        for m in range(M):
            s_zz = 0.0
            s_zr = 0.0
            w_old = W[m, k]
            for p in range(row_ptr[m], row_ptr[m + 1]):
                zk = Z[k, row_cols[p]]
                s_zz += zk * zk
                s_zr += zk * (res[p] + w_old * zk)
            mean, var = factor_conditional(kind, s_zz, s_zr, s2, muW[m, k],
                                           tauW[m, k], lamW[m, k], hyper, counters)
            _log(log, n_log, VAR_FACTOR, SIDE_W, m, k, mean, var)
            if not (math.isfinite(mean) and math.isfinite(var) and var > 0.0):
                return _fail(diag_i, diag_f, VAR_FACTOR, SIDE_W, m, k, mean, var)
            x = tn_draw(mean, 1.0 / var, rng)
            delta = x - w_old
            if delta != 0.0:
                for p in range(row_ptr[m], row_ptr[m + 1]):
                    res[p] -= delta * Z[k, row_cols[p]]
            W[m, k] = x
            if hier:
                st = _hyper_update(kind, x, SIDE_W, m, k, muW, tauW, lamW, hyper,
                                   rng, log, n_log, diag_i, diag_f)
                if st != STATUS_OK:
                    return st
        for n in range(N):
            s_zz = 0.0
            s_zr = 0.0
            z_old = Z[k, n]
            for q in range(col_ptr[n], col_ptr[n + 1]):
                wk = W[col_rows[q], k]
                s_zz += wk * wk
                s_zr += wk * (res[col_pos[q]] + z_old * wk)
            mean, var = factor_conditional(kind, s_zz, s_zr, s2, muZ[k, n],
                                           tauZ[k, n], lamZ[k, n], hyper, counters)
            _log(log, n_log, VAR_FACTOR, SIDE_Z, k, n, mean, var)
            if not (math.isfinite(mean) and math.isfinite(var) and var > 0.0):
                return _fail(diag_i, diag_f, VAR_FACTOR, SIDE_Z, k, n, mean, var)
            x = tn_draw(mean, 1.0 / var, rng)
            delta = x - z_old
            if delta != 0.0:
                for q in range(col_ptr[n], col_ptr[n + 1]):
                    res[col_pos[q]] -= delta * W[col_rows[q], k]
            Z[k, n] = x
            if hier:
                st = _hyper_update(kind, x, SIDE_Z, k, n, muZ, tauZ, lamZ, hyper,
                                   rng, log, n_log, diag_i, diag_f)
                if st != STATUS_OK:
                    return st

    rss = compute_residual(W, Z, row_ptr, row_cols, vals, res)
    shape = 0.5 * vals.shape[0] + hyper[H_ALPHA_SIGMA]
    scale = 0.5 * rss + hyper[H_BETA_SIGMA]
    _log(log, n_log, VAR_SIGMA2, 0, 0, 0, shape, scale)
    if not (math.isfinite(scale) and scale > 0.0):
        return _fail(diag_i, diag_f, VAR_SIGMA2, 0, 0, 0, shape, scale)
    sigma2[0] = inv_gamma_draw(shape, scale, rng)
    return STATUS_OK


@numba.njit(cache=True)
def init_draws(kind, W, Z, muW, tauW, lamW, muZ, tauZ, lamZ, sigma2, hyper, rng):
    """Draw hyperprior variables from their priors, then the factors from the
    resulting priors, then sigma^2 from its prior."""
    M, K = W.shape
    N = Z.shape[1]
    for side in range(2):
        if side == SIDE_W:
            F, MU, TAU, LAM = W, muW, tauW, lamW
            R, C = M, K
        else:
            F, MU, TAU, LAM = Z, muZ, tauZ, lamZ
            R, C = K, N
        for i in range(R):
            for j in range(C):
                if kind == GEE:
                    MU[i, j] = 0.0
                    TAU[i, j] = 0.0
                    LAM[i, j] = hyper[H_GEE_LAMBDA]
                    F[i, j] = rng.standard_exponential() / hyper[H_GEE_LAMBDA]
                elif kind == GTT:
                    MU[i, j] = hyper[H_GTT_MU]
                    TAU[i, j] = hyper[H_GTT_TAU]
                    LAM[i, j] = 0.0
                    F[i, j] = tn_draw(hyper[H_GTT_MU], hyper[H_GTT_TAU], rng)
                else:
                    mu = hyper[H_MU_MU] + rng.standard_normal() / math.sqrt(hyper[H_TAU_MU])
                    tau = gamma_draw(hyper[H_A], hyper[H_B], rng)
                    if tau < PARAM_FLOOR:
                        tau = PARAM_FLOOR
                    lam = 0.0
                    if kind == GRRN:
                        lam = gamma_draw(hyper[H_ALPHA_LAMBDA], hyper[H_BETA_LAMBDA], rng)
                        if lam < PARAM_FLOOR:
                            lam = PARAM_FLOOR
                    MU[i, j] = mu
                    TAU[i, j] = tau
                    LAM[i, j] = lam
                    F[i, j] = tn_draw((tau * mu - lam) / tau, tau, rng)
    sigma2[0] = inv_gamma_draw(hyper[H_ALPHA_SIGMA], hyper[H_BETA_SIGMA], rng)


def index_structure(mask, values):
    """Row-order and column-order index arrays for the observed cells."""
    rows, cols = np.nonzero(mask)  # row-major order
    M, N = mask.shape
    row_ptr = np.zeros(M + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=M), out=row_ptr[1:])
    order = np.lexsort((rows, cols))  # column-major order of the same cells
    col_ptr = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=N), out=col_ptr[1:])
    return dict(
        row_ptr=row_ptr,
        row_cols=cols.astype(np.int64),
        col_ptr=col_ptr,
        col_rows=rows[order].astype(np.int64),
        col_pos=order.astype(np.int64),
        vals=np.ascontiguousarray(values[rows, cols], dtype=float),
    )
