"""Densities, normalizers and samplers for the families used by the models.

Parameterizations:

* ``N(x | mu, 1/tau)``   Gaussian with mean ``mu`` and precision ``tau``.
* ``G(x | alpha, beta)``  Gamma with shape ``alpha`` and *rate* ``beta``.
* ``IG(x | alpha, beta)`` inverse-Gamma with shape ``alpha`` and *scale* ``beta``.
* ``E(x | lam)``          exponential with rate ``lam``.
* ``TN(x | mu, 1/tau)``   Gaussian restricted to ``x >= 0`` and renormalized;
  ``mu`` and ``tau`` are the parent mean and parent precision.
* ``RN(x | mu, 1/tau, lam)`` normalized product ``N(x | mu, 1/tau) E(x | lam)``,
  identical to ``TN(x | (tau*mu - lam)/tau, 1/tau)``.

TN and RN are kept as distinct names throughout; they are never aliased.

The scalar samplers are numba kernels that take a ``numpy.random.Generator``
so the Gibbs sweeps can call them directly. Every draw goes through the
caller's generator; there is no module-level random state.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

PARAM_FLOOR = 1e-12

# (mu, tau, lam) settings on which the closed-form RN normalizer is checked
# against quadrature; spans both signs of the shifted mean and tails out to
# about 17 standard deviations
NORMALIZER_SWEEP = tuple(
    (mu, tau, lam)
    for mu in (-5.0, -1.0, 0.0, 1.0, 3.0, 10.0)
    for tau in (0.1, 1.0, 10.0)
    for lam in (0.01, 0.5, 1.0, 5.0)
)

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class DomainError(ValueError):
    """Raised when a distribution is asked for something outside its domain."""


@dataclass(frozen=True)
class TnParams:
    parent_mean: float
    parent_precision: float

    def __post_init__(self):
        _check_finite(self.parent_mean, "parent_mean")
        _check_positive(self.parent_precision, "parent_precision")


@dataclass(frozen=True)
class RnParams:
    parent_mean: float
    parent_precision: float
    rate: float

    def __post_init__(self):
        _check_finite(self.parent_mean, "parent_mean")
        _check_positive(self.parent_precision, "parent_precision")
        _check_positive(self.rate, "rate")

    def to_tn(self):
        """The truncated normal with the same density."""
        tau = self.parent_precision
        return TnParams((tau * self.parent_mean - self.rate) / tau, tau)


@dataclass(frozen=True)
class GaussianParams:
    mean: float
    precision: float

    def __post_init__(self):
        _check_finite(self.mean, "mean")
        _check_positive(self.precision, "precision")


@dataclass(frozen=True)
class GammaParams:
    """Gamma with shape and rate (mean ``shape / rate``)."""

    shape: float
    rate: float

    def __post_init__(self):
        _check_positive(self.shape, "shape")
        _check_positive(self.rate, "rate")

    @property
    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class InvGammaParams:
    """Inverse-Gamma with shape and scale (mean ``scale / (shape - 1)``)."""

    shape: float
    scale: float

    def __post_init__(self):
        _check_positive(self.shape, "shape")
        _check_positive(self.scale, "scale")

    @property
    def mean(self):
        if self.shape <= 1:
            return math.inf
        return self.scale / (self.shape - 1.0)


def _check_finite(x, name):
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")


def _check_positive(x, name):
    _check_finite(x, name)
    if x <= 0:
        raise DomainError(f"{name} must be > 0, got {x!r}")


# ---------------------------------------------------------------------------
# Normal CDF and log-densities

@numba.njit(cache=True)
def _phi_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@numba.njit(cache=True)
def _log_phi_upper(x):
    # log(1 - Phi(x)); erfc keeps relative precision until it underflows near 38
    if x < 35.0:
        return math.log(0.5 * math.erfc(x / _SQRT2))
    y2 = 0.5 * x * x
    inv = 1.0 / (x * x)
    series = 1.0 - inv + 3.0 * inv * inv - 15.0 * inv ** 3 + 105.0 * inv ** 4
    return -y2 - math.log(x) - _LOG_SQRT_2PI + math.log(series)


def std_normal_cdf(x):
    """Standard normal CDF, computed from ``erfc`` so the lower tail keeps
    full relative precision."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf needs a finite argument, got {x!r}")
    return _phi_cdf(x)


def log_std_normal_sf(x):
    """``log(1 - Phi(x))``."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"log_std_normal_sf needs a finite argument, got {x!r}")
    return _log_phi_upper(x)


def rn_normalizer(p):
    """C(mu, tau, lam): the integral of ``N(x | mu, 1/tau) E(x | lam)`` over
    ``[0, inf)``."""
    return math.exp(log_rn_normalizer(p))


def log_rn_normalizer(p):
    mu, tau, lam = p.parent_mean, p.parent_precision, p.rate
    shifted = (tau * mu - lam) / math.sqrt(tau)
    return (math.log(lam) + _log_phi_upper(-shifted)
            - mu * lam + lam * lam / (2.0 * tau))


def tn_logpdf(x, p):
    if x < 0:
        return -math.inf
    mu, tau = p.parent_mean, p.parent_precision
    return (0.5 * math.log(tau) - _LOG_SQRT_2PI - 0.5 * tau * (x - mu) ** 2
            - _log_phi_upper(-mu * math.sqrt(tau)))


def tn_density(x, p):
    return 0.0 if x < 0 else math.exp(tn_logpdf(x, p))


def rn_logpdf(x, p):
    return tn_logpdf(x, p.to_tn())


def rn_density(x, p):
    return tn_density(x, p.to_tn())


def gamma_logpdf(x, p):
    if x <= 0:
        return -math.inf
    a, b = p.shape, p.rate
    return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(x) - b * x


def inv_gamma_logpdf(x, p):
    if x <= 0:
        return -math.inf
    a, b = p.shape, p.scale
    return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(x) - b / x


def normal_logpdf(x, p):
    tau = p.precision
    return 0.5 * math.log(tau) - _LOG_SQRT_2PI - 0.5 * tau * (x - p.mean) ** 2


# ---------------------------------------------------------------------------
# Samplers (numba kernels)

@numba.njit(cache=True)
def _std_tn_tail(alpha, rng):
    """Standard normal truncated to ``[alpha, inf)`` for ``alpha >= 0``.

    Exponential-proposal rejection with the optimal rate; the acceptance
    probability stays bounded away from zero for every ``alpha``.
    """
    lam = 0.5 * (alpha + math.sqrt(alpha * alpha + 4.0))
    while True:
        z = alpha + rng.standard_exponential() / lam
        if rng.random() <= math.exp(-0.5 * (z - lam) * (z - lam)):
            return z


@numba.njit(cache=True)
def tn_draw(mu, tau, rng):
    """One draw from ``TN(mu, 1/tau)``; NaN when ``mu`` or ``tau`` is not
    finite (callers check)."""
    if not (math.isfinite(mu) and math.isfinite(tau)):
        return math.nan
    if tau < PARAM_FLOOR:
        tau = PARAM_FLOOR
    sigma = 1.0 / math.sqrt(tau)
    alpha = -mu / sigma
    if alpha < 0.0:
        # at least half the parent mass is on the positive side
        while True:
            x = mu + sigma * rng.standard_normal()
            if x >= 0.0:
                return x
    x = mu + sigma * _std_tn_tail(alpha, rng)
    return x if x > 0.0 else 0.0


@numba.njit(cache=True)
def gamma_draw(shape, rate, rng):
    return rng.standard_gamma(shape) / rate


@numba.njit(cache=True)
def inv_gamma_draw(shape, scale, rng):
    return scale / rng.standard_gamma(shape)


@numba.njit(cache=True)
def _tn_many(mu, tau, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = tn_draw(mu, tau, rng)
    return out


@numba.njit(cache=True)
def _gamma_many(shape, rate, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = gamma_draw(shape, rate, rng)
    return out


@numba.njit(cache=True)
def _inv_gamma_many(shape, scale, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = inv_gamma_draw(shape, scale, rng)
    return out


def sample_tn(p, rng, size=None):
    """Draw from ``TN(parent_mean, 1/parent_precision)``.

    Gaussian rejection is used when the parent mean is nonnegative; below zero
    the sampler switches to an exponential proposal so it terminates quickly
    even deep in the tail.
    """
    if size is None:
        return tn_draw(p.parent_mean, p.parent_precision, rng)
    return _tn_many(p.parent_mean, p.parent_precision, int(size), rng)


def sample_rn(p, rng, size=None):
    return sample_tn(p.to_tn(), rng, size)


def sample_gamma(p, rng, size=None):
    """Shape-rate Gamma draw(s)."""
    if size is None:
        return gamma_draw(p.shape, p.rate, rng)
    return _gamma_many(p.shape, p.rate, int(size), rng)


def sample_inverse_gamma(p, rng, size=None):
    """Shape-scale inverse-Gamma draw(s)."""
    if size is None:
        return inv_gamma_draw(p.shape, p.scale, rng)
    return _inv_gamma_many(p.shape, p.scale, int(size), rng)


def sample_normal(p, rng, size=None):
    sd = 1.0 / math.sqrt(p.precision)
    if size is None:
        return p.mean + sd * rng.standard_normal()
    return p.mean + sd * rng.standard_normal(int(size))
