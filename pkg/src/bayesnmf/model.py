"""Masked data matrices, factor/prior state, and the masked reconstruction loss."""

import math
from dataclasses import dataclass, replace

import numpy as np


class StructuralError(ValueError):
    """Shapes that do not line up."""


@dataclass
class ObservedMatrix:
    """Dense values plus a boolean mask of observed cells.

    Values stored at unobserved cells are never read by any computation.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise StructuralError(
                f"values {self.values.shape} and mask {self.mask.shape} must be "
                "2-d with identical shape")

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def observed_count(self):
        return int(self.mask.sum())

    @property
    def observed_fraction(self):
        return self.observed_count / self.mask.size

    def observed_values(self):
        return self.values[self.mask]

    def observed_mean(self):
        if self.observed_count == 0:
            raise ValueError("no observed entries")
        return float(self.values[self.mask].mean())

    def with_mask(self, mask):
        return ObservedMatrix(self.values, mask)

    def copy(self):
        return ObservedMatrix(self.values.copy(), self.mask.copy())


@dataclass
class FactorState:
    W: np.ndarray
    Z: np.ndarray
    sigma2: float

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.Z = np.asarray(self.Z, dtype=float)
        if self.W.ndim != 2 or self.Z.ndim != 2 or self.W.shape[1] != self.Z.shape[0]:
            raise StructuralError(
                f"W {self.W.shape} and Z {self.Z.shape} are not conformable")

    @property
    def K(self):
        return self.W.shape[1]

    def copy(self):
        return FactorState(self.W.copy(), self.Z.copy(), float(self.sigma2))


@dataclass
class PriorState:
    """Per-entry hyperprior variables of the hierarchical models.

    The ``lambda_*`` arrays are unused by GTTN and the whole state is unused
    by GEE/GTT, which carry fixed prior constants instead.
    """

    mu_W: np.ndarray
    tau_W: np.ndarray
    lambda_W: np.ndarray
    mu_Z: np.ndarray
    tau_Z: np.ndarray
    lambda_Z: np.ndarray

    @classmethod
    def constant(cls, M, N, K, mu=0.0, tau=1.0, lam=0.0):
        return cls(np.full((M, K), float(mu)), np.full((M, K), float(tau)),
                   np.full((M, K), float(lam)), np.full((K, N), float(mu)),
                   np.full((K, N), float(tau)), np.full((K, N), float(lam)))

    def copy(self):
        return PriorState(*(getattr(self, f).copy() for f in
                            ("mu_W", "tau_W", "lambda_W", "mu_Z", "tau_Z", "lambda_Z")))


@dataclass(frozen=True)
class HyperParams:
    """Top-level constants. ``beta_lambda=None`` means ``sqrt(m0 / K)`` with
    ``m0`` the mean of the observed training entries (see :meth:`resolve`)."""

    alpha_sigma: float = 1.0
    beta_sigma: float = 1.0
    mu_mu: float = 0.0
    tau_mu: float = 0.1
    a: float = 1.0
    b: float = 1.0
    alpha_lambda: float = 1.0
    beta_lambda: float | None = None
    beta_lambda_scale: float = 1.0
    gee_lambda: float = 0.1
    gtt_mu: float = 0.0
    gtt_tau: float = 0.1

    def __post_init__(self):
        for name in ("alpha_sigma", "beta_sigma", "tau_mu", "a", "b",
                     "alpha_lambda", "beta_lambda_scale", "gee_lambda", "gtt_tau"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("mu_mu", "gtt_mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.beta_lambda is not None and not (
                math.isfinite(self.beta_lambda) and self.beta_lambda > 0):
            raise ValueError(f"beta_lambda must be positive, got {self.beta_lambda!r}")

    def resolve(self, train, K):
        """Fill in the data-dependent default for ``beta_lambda``."""
        if self.beta_lambda is not None:
            return self
        m0 = train.observed_mean()
        if m0 <= 0:
            raise ValueError("default beta_lambda needs a positive observed mean")
        return replace(self, beta_lambda=self.beta_lambda_scale * math.sqrt(m0 / K))

    def as_array(self):
        if self.beta_lambda is None:
            raise ValueError("beta_lambda unresolved; call resolve() first")
        return np.array([self.alpha_sigma, self.beta_sigma, self.mu_mu, self.tau_mu,
                         self.a, self.b, self.alpha_lambda, self.beta_lambda,
                         self.gee_lambda, self.gtt_mu, self.gtt_tau], dtype=float)

    def to_dict(self):
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def predict(state):
    """Reconstruction ``W @ Z``."""
    if state.W.shape[1] != state.Z.shape[0]:
        raise StructuralError("W and Z are not conformable")
    return state.W @ state.Z


def masked_mse(data, prediction, mask_override=None):
    """Mean squared error over observed cells (sum divided by observed count)."""
    prediction = np.asarray(prediction, dtype=float)
    if prediction.shape != data.shape:
        raise StructuralError(
            f"prediction {prediction.shape} does not match data {data.shape}")
    mask = data.mask if mask_override is None else np.asarray(mask_override, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("masked_mse needs at least one observed entry")
    diff = data.values[mask] - prediction[mask]
    return float(np.dot(diff, diff) / n)
