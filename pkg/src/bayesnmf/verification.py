"""Independent oracles for testing the samplers.

Nothing here calls into :mod:`bayesnmf.distributions` for the quantity being
checked: normal tail probabilities come from ``scipy.special``/``mpmath``,
integrals from adaptive quadrature, and conditional densities are evaluated
from the full joint log-density of a tiny instance on a grid.
"""

import math
import warnings
from dataclasses import dataclass, replace

import mpmath
import numpy as np
from scipy import integrate, special

from .model import FactorState, ObservedMatrix, PriorState


@dataclass(frozen=True)
class QuadratureSpec:
    integrand: object
    lo: float
    hi: float
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    message: str = ""


def integrate_quad(spec):
    """Adaptive Gauss-Kronrod quadrature. Non-convergence is reported through
    ``converged=False``, never silently."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(spec.integrand, spec.lo, spec.hi,
                                        epsabs=spec.abs_tol, epsrel=1e-12,
                                        limit=spec.max_subdivisions)
        except integrate.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                value, err = integrate.quad(spec.integrand, spec.lo, spec.hi,
                                            epsabs=spec.abs_tol, epsrel=1e-12,
                                            limit=spec.max_subdivisions)
            return QuadResult(value, err, False, str(exc))
    return QuadResult(value, err, err <= max(spec.abs_tol, 1e-12 * abs(value)))


def upper_limit(mean, sd, n_sd=12.0):
    """Finite stand-in for +inf: mass beyond 12 sd is below 1e-30."""
    return max(mean, 0.0) + n_sd * sd


def normal_pdf(x, mean, precision):
    return math.sqrt(precision / (2 * math.pi)) * math.exp(-0.5 * precision * (x - mean) ** 2)


def rn_normalizer_quad(mu, tau, lam):
    """Integral of ``N(x | mu, 1/tau) * lam * exp(-lam x)`` over ``[0, inf)``.

    The integrand is rescaled by its maximum on the domain so that tiny or
    huge normalizers keep full relative precision.
    """
    peak = max(mu - lam / tau, 0.0)
    log_peak = (0.5 * math.log(tau / (2 * math.pi)) - 0.5 * tau * (peak - mu) ** 2
                + math.log(lam) - lam * peak)

    def f(x):
        return math.exp(0.5 * math.log(tau / (2 * math.pi)) - 0.5 * tau * (x - mu) ** 2
                        + math.log(lam) - lam * x - log_peak)

    # the integrand is log-concave with mode ``peak``, so beyond 12 sd of the
    # Gaussian factor it is below exp(-72) of its maximum
    sd = 1.0 / math.sqrt(tau)
    hi = peak + 12.0 * sd
    points = [p for p in (peak,) if 0 < p < hi]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, _ = integrate.quad(f, 0.0, hi, points=points or None,
                                  epsabs=0.0, epsrel=1e-12, limit=400)
    return value * math.exp(log_peak)


def tn_moments(parent_mean, parent_precision):
    """Mean and variance of ``TN(parent_mean, 1/parent_precision)`` from the
    standard identities, evaluated in 50-digit arithmetic."""
    with mpmath.workdps(50):
        mu = mpmath.mpf(parent_mean)
        sigma = 1 / mpmath.sqrt(mpmath.mpf(parent_precision))
        alpha = -mu / sigma
        h = mpmath.npdf(alpha) / (1 - mpmath.ncdf(alpha))
        mean = mu + sigma * h
        var = sigma ** 2 * (1 + alpha * h - h ** 2)
        return float(mean), float(var)


def tn_moments_quad(parent_mean, parent_precision):
    """Same moments by quadrature (independent route)."""
    sd = 1.0 / math.sqrt(parent_precision)
    hi = upper_limit(parent_mean, sd)
    lo_peak = max(parent_mean, 0.0)

    def w(x):
        return math.exp(-0.5 * parent_precision * ((x - parent_mean) ** 2
                                                   - (lo_peak - parent_mean) ** 2))
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    z = integrate.quad(w, 0, hi, **opts)[0]
    m1 = integrate.quad(lambda x: x * w(x), 0, hi, **opts)[0] / z
    m2 = integrate.quad(lambda x: (x - m1) ** 2 * w(x), 0, hi, **opts)[0] / z
    return m1, m2


def tn_cdf(x, parent_mean, parent_precision):
    """CDF of the truncated normal via ``scipy.special.log_ndtr``."""
    if x <= 0:
        return 0.0
    s = math.sqrt(parent_precision)
    a = -parent_mean * s
    b = (x - parent_mean) * s
    # (Phi(b) - Phi(a)) / (1 - Phi(a)) using upper tails for precision
    log_sa = special.log_ndtr(-a)
    log_sb = special.log_ndtr(-b)
    return -math.expm1(log_sb - log_sa)


# ---------------------------------------------------------------------------
# Brute-force conditional checks


@dataclass
class TinyInstance:
    data: ObservedMatrix
    state: FactorState
    prior: PriorState


def random_tiny_instance(rng, M=4, N=3, K=2, missing=1):
    """Small random problem with a few unobserved cells and moderate noise."""
    W = rng.exponential(1.0, (M, K))
    Z = rng.exponential(1.0, (K, N))
    A = W @ Z + 0.5 * rng.standard_normal((M, N))
    mask = np.ones((M, N), dtype=bool)
    cells = rng.choice(M * N, size=missing, replace=False)
    mask.flat[cells] = False
    A[~mask] = rng.normal(50, 10, size=(~mask).sum())  # must never be read
    prior = PriorState(
        mu_W=rng.normal(0.5, 1.0, (M, K)), tau_W=rng.gamma(2.0, 1.0, (M, K)),
        lambda_W=rng.gamma(2.0, 0.5, (M, K)), mu_Z=rng.normal(0.5, 1.0, (K, N)),
        tau_Z=rng.gamma(2.0, 1.0, (K, N)), lambda_Z=rng.gamma(2.0, 0.5, (K, N)))
    state = FactorState(rng.exponential(1.0, (M, K)), rng.exponential(1.0, (K, N)),
                        float(rng.uniform(0.3, 1.5)))
    return TinyInstance(ObservedMatrix(A, mask), state, prior)


def _log_normal(x, mean, precision):
    return 0.5 * np.log(precision / (2 * np.pi)) - 0.5 * precision * (x - mean) ** 2


def _log_gamma(x, shape, rate):
    return shape * np.log(rate) - special.gammaln(shape) + (shape - 1) * np.log(x) - rate * x


def _log_invgamma(x, shape, scale):
    return (shape * np.log(scale) - special.gammaln(shape)
            - (shape + 1) * np.log(x) - scale / x)


def _log_rn_norm(mu, tau, lam):
    # log C(mu, tau, lam) via scipy's log_ndtr (independent of the package's erfc route)
    return (np.log(lam) + special.log_ndtr((tau * mu - lam) / np.sqrt(tau))
            - mu * lam + lam ** 2 / (2 * tau))


def log_joint(kind, inst, hyper):
    """Full log-density of data, factors, hyperprior variables and sigma^2.

    Written directly from the generative models:

    * likelihood ``N(a_ij | w_i z_j, sigma^2)`` on observed cells;
    * GRRN factors ``RN(w | mu, 1/tau, lam) = N(w|mu,1/tau) E(w|lam) / C`` with
      the hyperprior ``C * N(mu | mu_mu, 1/tau_mu) G(tau | a, b) G(lam | al, bl)``;
    * GTTN factors ``TN(w | mu, 1/tau)`` with a hyperprior that cancels the TN
      normalizer: ``(1 - Phi(-mu sqrt(tau))) N(mu | ...) G(tau | a, b)``;
    * GEE factors ``E(w | lambda)``; GTT factors ``TN(w | mu, 1/tau)`` fixed;
    * ``sigma^2 ~ IG(alpha_sigma, beta_sigma)``.

    Returns ``-inf`` outside the support.
    """
    st, pr, d = inst.state, inst.prior, inst.data
    W, Z, s2 = st.W, st.Z, st.sigma2
    if s2 <= 0 or np.any(W < 0) or np.any(Z < 0):
        return -np.inf
    r = (d.values - W @ Z)[d.mask]
    lp = float(np.sum(_log_normal(r, 0.0, 1.0 / s2)))
    lp += float(_log_invgamma(s2, hyper.alpha_sigma, hyper.beta_sigma))
    for F, mu, tau, lam in ((W, pr.mu_W, pr.tau_W, pr.lambda_W),
                            (Z, pr.mu_Z, pr.tau_Z, pr.lambda_Z)):
        if kind == "GEE":
            lp += float(np.sum(np.log(hyper.gee_lambda) - hyper.gee_lambda * F))
        elif kind == "GTT":
            m, t = hyper.gtt_mu, hyper.gtt_tau
            lp += float(np.sum(_log_normal(F, m, t)
                               - special.log_ndtr(m * np.sqrt(t))))
        elif kind == "GTTN":
            if np.any(tau <= 0):
                return -np.inf
            log_norm = special.log_ndtr(mu * np.sqrt(tau))
            lp += float(np.sum(_log_normal(F, mu, tau) - log_norm))
            lp += float(np.sum(log_norm + _log_normal(mu, hyper.mu_mu, hyper.tau_mu)
                               + _log_gamma(tau, hyper.a, hyper.b)))
        elif kind == "GRRN":
            if np.any(tau <= 0) or np.any(lam <= 0):
                return -np.inf
            log_c = _log_rn_norm(mu, tau, lam)
            lp += float(np.sum(_log_normal(F, mu, tau) + np.log(lam) - lam * F - log_c))
            lp += float(np.sum(log_c + _log_normal(mu, hyper.mu_mu, hyper.tau_mu)
                               + _log_gamma(tau, hyper.a, hyper.b)
                               + _log_gamma(lam, hyper.alpha_lambda, hyper.beta_lambda)))
        else:
            raise ValueError(f"unknown model {kind!r}")
    return lp


_SUPPORT = {"w": (0.0, np.inf), "z": (0.0, np.inf), "mu_w": (-np.inf, np.inf),
            "mu_z": (-np.inf, np.inf), "tau_w": (0.0, np.inf), "tau_z": (0.0, np.inf),
            "lambda_w": (0.0, np.inf), "lambda_z": (0.0, np.inf),
            "sigma2": (0.0, np.inf)}


def _setter(inst, variable, idx):
    attr = {"w": ("state", "W"), "z": ("state", "Z"),
            "mu_w": ("prior", "mu_W"), "mu_z": ("prior", "mu_Z"),
            "tau_w": ("prior", "tau_W"), "tau_z": ("prior", "tau_Z"),
            "lambda_w": ("prior", "lambda_W"), "lambda_z": ("prior", "lambda_Z")}
    if variable == "sigma2":
        def set_(v):
            inst.state.sigma2 = v
        return set_
    owner, name = attr[variable]
    arr = getattr(getattr(inst, owner), name)

    def set_(v):
        arr[idx] = v
    return set_


def _bulk_grid(logf, lo, hi, n, max_widen):
    """Uniform grid over the region where ``logf`` is within 50 nats of its
    maximum, plus normalized weights. ``None`` if the bulk is never enclosed."""
    centre = width = None
    for _ in range(max_widen + 1):
        if centre is None:
            xs = np.linspace(lo, hi, 2001)
        else:
            xs = np.linspace(max(lo, centre - width), min(hi, centre + width), 2001)
        lv = np.array([logf(x) for x in xs])
        finite = np.isfinite(lv)
        keep = xs[finite & (lv > lv[finite].max() - 50)]
        a, b = keep.min(), keep.max()
        pad = 0.25 * (b - a) + 1e-9
        a, b = max(lo, a - pad), min(hi, b + pad)
        xs = np.linspace(a, b, n)
        lv = np.array([logf(x) for x in xs])
        lv[~np.isfinite(lv)] = -np.inf
        p = np.exp(lv - lv.max())
        if max(p[0], p[-1]) < 1e-14:
            return xs, p
        centre, width = 0.5 * (a + b), 2.0 * (b - a)
    return None


def grid_moments(logf, lo, hi, n=2001, max_widen=4):
    """Mean and variance of the density proportional to ``exp(logf)``.

    Densities on ``[0, inf)`` are integrated over ``u = log x`` (Jacobian
    included), which resolves both a spike at the origin and a heavy right
    tail; densities on the real line use ``x`` directly. Either way the grid
    is a Simpson rule over the bulk located by a coarse scan.
    """
    if lo == 0.0 and hi == np.inf:
        grid = _bulk_grid(lambda u: logf(math.exp(u)) + u, -40.0, 10.0, n, max_widen)
        if grid is None:
            return None
        us, p = grid
        xs = np.exp(us)
    elif lo == -np.inf and hi == np.inf:
        grid = _bulk_grid(logf, -1e3, 1e3, n, max_widen)
        if grid is None:
            return None
        xs, p = grid
        us = xs
    else:
        raise ValueError("supported supports are [0, inf) and the real line")
    mass = integrate.simpson(p, x=us)
    mean = integrate.simpson(xs * p, x=us) / mass
    var = integrate.simpson((xs - mean) ** 2 * p, x=us) / mass
    return mean, var


def implemented_moments(family, params):
    """Mean and variance of the distribution family the sampler reports."""
    if family == "tn":
        return tn_moments(params.parent_mean, params.parent_precision)
    if family == "normal":
        return params.mean, 1.0 / params.precision
    if family == "gamma":
        return params.shape / params.rate, params.shape / params.rate ** 2
    if family == "invgamma":
        a, b = params.shape, params.scale
        return b / (a - 1), b ** 2 / ((a - 1) ** 2 * (a - 2))
    raise ValueError(family)


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    variable: str
    index: tuple
    implemented: tuple
    oracle: tuple
    rel_error: float


def implemented_conditional(kind, inst, hyper, variable, idx):
    """Ask the samplers module for the conditional of one variable."""
    from . import samplers as S
    st, pr, d = inst.state, inst.prior, inst.data
    if variable == "sigma2":
        return "invgamma", S.cond_sigma2(st, d, hyper)
    side = variable[-1]
    i, j = idx if idx else (0, 0)
    if variable in ("w", "z"):
        if kind == "GRRN":
            f = S.grrn_cond_w if side == "w" else S.grrn_cond_z
            return "tn", f(st, pr, d, i, j)
        if kind == "GTTN":
            f = S.gttn_cond_w if side == "w" else S.gttn_cond_z
            return "tn", f(st, pr, d, i, j)
        if kind == "GEE":
            f = S.gee_cond_w if side == "w" else S.gee_cond_z
            return "tn", f(st, d, i, j, hyper)
        if kind == "GTT":
            f = S.gtt_cond_w if side == "w" else S.gtt_cond_z
            return "tn", f(st, d, i, j, hyper)
    F = st.W if side == "w" else st.Z
    MU = pr.mu_W if side == "w" else pr.mu_Z
    TAU = pr.tau_W if side == "w" else pr.tau_Z
    x = F[i, j]
    if variable.startswith("mu_"):
        f = S.grrn_cond_mu if kind == "GRRN" else S.gttn_cond_mu
        return "normal", f(x, TAU[i, j], hyper)
    if variable.startswith("tau_"):
        f = S.grrn_cond_tau if kind == "GRRN" else S.gttn_cond_tau
        return "gamma", f(x, MU[i, j], hyper)
    if variable.startswith("lambda_") and kind == "GRRN":
        return "gamma", S.grrn_cond_lambda(x, hyper)
    raise ValueError(f"{kind} has no variable {variable!r}")


def perturb(params, factor=1.1):
    """Scale every parameter by ``factor`` (negative control)."""
    fields = params.__dataclass_fields__
    return replace(params, **{f: getattr(params, f) * factor for f in fields})


def brute_conditional_check(kind, inst, hyper, variable, idx=(), rtol=1e-3,
                            params_transform=None):
    """Compare the implemented conditional of ``variable`` with grid moments
    of the normalized joint density as a function of that variable alone.

    Passes iff mean and standard deviation agree within ``rtol`` (relative to
    the oracle's standard deviation for the mean, so centred variables work).
    """
    if _too_big(inst):
        raise ValueError("brute-force checks are for instances up to 4x4 with K <= 2")
    hyper = hyper.resolve(inst.data, inst.state.K)
    family, params = implemented_conditional(kind, inst, hyper, variable, idx)
    if params_transform is not None:
        params = params_transform(params)
    impl = implemented_moments(family, params)

    work = TinyInstance(inst.data, inst.state.copy(), inst.prior.copy())
    set_ = _setter(work, variable, idx)

    def logf(v):
        set_(v)
        return log_joint(kind, work, hyper)

    lo, hi = _SUPPORT[variable]
    oracle = grid_moments(logf, lo, hi)
    if oracle is None:
        return CheckReport(False, variable, idx, impl, (math.nan, math.nan), math.inf)
    sd = math.sqrt(oracle[1])
    err = max(abs(impl[0] - oracle[0]) / sd,
              abs(math.sqrt(impl[1]) - sd) / sd)
    return CheckReport(err <= rtol, variable, tuple(idx), impl, oracle, err)


def _too_big(inst):
    M, N = inst.data.shape
    return M > 4 or N > 4 or inst.state.K > 2


def model_variables(kind, inst):
    """All (variable, index) pairs a model samples on an instance."""
    M, N = inst.data.shape
    K = inst.state.K
    names = ["w", "z"]
    if kind in ("GRRN", "GTTN"):
        names += ["mu_w", "mu_z", "tau_w", "tau_z"]
    if kind == "GRRN":
        names += ["lambda_w", "lambda_z"]
    out = []
    for name in names:
        shape = (M, K) if name.endswith("w") else (K, N)
        out += [(name, (i, j)) for i in range(shape[0]) for j in range(shape[1])]
    out.append(("sigma2", ()))
    return out
