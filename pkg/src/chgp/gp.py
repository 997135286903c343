"""Gaussian-process core: covariance assembly, likelihoods, kriging and the
microergodic estimator of the CH family.

Every likelihood and prediction call factorizes its covariance matrix once
(Cholesky, with a bounded jitter escalation) and reuses the factor for the
determinant, the quadratic forms and the prediction weights.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import gammaln
from scipy.spatial.distance import pdist, squareform

from .design import Locations, condensed_dist, cross_dist
from .errors import DecompositionError, DomainError
from .kernels import CHParams, KernelSpec, TensorSpec, covariance, tensor_cov

__all__ = [
    "Dataset",
    "GPModel",
    "FitResult",
    "PredictionResult",
    "PairLags",
    "Cholesky",
    "kernel_matrix",
    "cross_cov",
    "cov_matrix",
    "factorize",
    "loglik",
    "reml_loglik",
    "krige",
    "microergodic_mle",
    "microergodic_ci",
]

Z95 = 1.959963984540054
_JITTER_START = 1e-10
_JITTER_STOP = 1e-6


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``z`` at ``locs``."""

    locs: Locations
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float).ravel()
        if z.shape[0] != self.locs.n:
            raise DomainError(f"{z.shape[0]} observations for {self.locs.n} locations")
        if not np.all(np.isfinite(z)):
            raise DomainError("observations must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.locs.n


@dataclass(frozen=True)
class GPModel:
    """Kernel plus constant mean ``mean_b`` and nugget variance ``nugget_tau2``.

    With ``estimate_mean`` the mean is replaced by its generalized least
    squares estimate wherever the data are used; ``mean_correction`` then
    adds the mean-estimation term to kriging variances.
    """

    kernel: KernelSpec
    mean_b: float = 0.0
    nugget_tau2: float = 0.0
    estimate_mean: bool = False
    mean_correction: bool = True

    def __post_init__(self):
        if not (self.nugget_tau2 >= 0 and math.isfinite(self.nugget_tau2)):
            raise DomainError("nugget_tau2 must be finite and nonnegative")
        if not math.isfinite(self.mean_b):
            raise DomainError("mean_b must be finite")

    @property
    def sigma2(self):
        return self.kernel.sigma2

    @property
    def nugget_ratio(self):
        return self.nugget_tau2 / self.kernel.sigma2


@dataclass(frozen=True)
class FitResult:
    """Outcome of a covariance-parameter fit.

    ``microergodic_hat``/``microergodic_ci95`` are ``None`` unless the kernel
    is CH.
    """

    model: GPModel
    loglik: float
    objective: str
    microergodic_hat: Optional[float]
    microergodic_ci95: Optional[tuple]
    n_evals: int
    converged: bool
    free_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PredictionResult:
    """Kriging means, standard errors and 95% intervals for the latent process."""

    mean: np.ndarray
    sd: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray


class PairLags:
    """Pairwise lags of one location set, deduplicated for kernel evaluation.

    Building this once and reusing it across many kernels (as an optimizer
    does) saves recomputing distances; each kernel is evaluated only on the
    distinct lag values.
    """

    def __init__(self, locs):
        self.locs = locs
        self.n = locs.n
        self._iso = None
        self._axes = None

    def _isotropic(self):
        if self._iso is None:
            cond = condensed_dist(self.locs) if self.n > 1 else np.empty(0)
            self._iso = np.unique(cond, return_inverse=True)
        return self._iso

    def _per_axis(self):
        if self._axes is None:
            if self.locs.metric != "euclidean":
                raise DomainError("tensor kernels need euclidean coordinates")
            self._axes = [
                np.unique(pdist(self.locs.coords[:, [k]]), return_inverse=True)
                for k in range(self.locs.dim)
            ]
        return self._axes

    def matrix(self, kernel):
        """Covariance matrix of ``kernel`` over the locations (no nugget)."""
        if self.n == 1:
            return np.full((1, 1), float(kernel.sigma2))
        if isinstance(kernel, TensorSpec):
            axes = self._per_axis()
            if len(axes) != kernel.dim:
                raise DomainError(
                    f"tensor kernel of arity {kernel.dim} used with {len(axes)}-D locations"
                )
            cond = np.full(axes[0][1].shape, kernel.sigma2)
            for comp, (uniq, inv) in zip(kernel.components, axes):
                cond *= np.asarray(covariance(comp, uniq))[inv.ravel()]
        else:
            uniq, inv = self._isotropic()
            cond = np.asarray(covariance(kernel, uniq))[inv.ravel()]
        out = squareform(cond, checks=False)
        np.fill_diagonal(out, kernel.sigma2)
        return out


def kernel_matrix(kernel, locs):
    """Covariance matrix of ``kernel`` over ``locs``, without nugget."""
    return PairLags(locs).matrix(kernel)


def cross_cov(kernel, a, b):
    """Covariance between every location of ``a`` (rows) and ``b`` (columns)."""
    if isinstance(kernel, TensorSpec):
        if a.metric != "euclidean" or b.metric != "euclidean":
            raise DomainError("tensor kernels need euclidean coordinates")
        return tensor_cov(a.coords[:, None, :], b.coords[None, :, :], kernel)
    d = cross_dist(a, b)
    uniq, inv = np.unique(d, return_inverse=True)
    return np.asarray(covariance(kernel, uniq))[inv.ravel()].reshape(d.shape)


def cov_matrix(model, locs):
    """``sigma2 R + tau2 I`` over ``locs``."""
    k = kernel_matrix(model.kernel, locs)
    k[np.diag_indices_from(k)] += model.nugget_tau2
    return k


class Cholesky:
    """Lower Cholesky factor with solves and log-determinant.

    ``jitter`` records the diagonal increment that was needed (0 if none).
    """

    def __init__(self, lower, jitter):
        self.lower = lower
        self.jitter = jitter

    @property
    def logdet(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def half_solve(self, b):
        """``L^-1 b``."""
        return linalg.solve_triangular(self.lower, b, lower=True, check_finite=False)

    def solve(self, b):
        """``K^-1 b``."""
        return linalg.cho_solve((self.lower, True), b, check_finite=False)


def factorize(k):
    """Cholesky factor of ``k``, escalating a diagonal jitter if needed.

    The jitter starts at 1e-10 times the mean diagonal and grows tenfold up
    to 1e-6 times the mean diagonal before :class:`DecompositionError`.
    """
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise DecompositionError("covariance matrix has non-finite entries")
    try:
        return Cholesky(linalg.cholesky(k, lower=True, check_finite=False), 0.0)
    except linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(k)))
    if not (math.isfinite(scale) and scale > 0):
        raise DecompositionError("covariance matrix has a non-positive or non-finite diagonal")
    rel = _JITTER_START
    while rel <= _JITTER_STOP * (1 + 1e-9):
        jitter = rel * scale
        try:
            lower = linalg.cholesky(k + jitter * np.eye(k.shape[0]), lower=True, check_finite=False)
            return Cholesky(lower, jitter)
        except linalg.LinAlgError:
            rel *= 10.0
    raise DecompositionError(
        f"covariance matrix is not positive definite even with jitter {_JITTER_STOP:g} x mean diagonal"
    )


@dataclass(frozen=True)
class ProfileTerms:
    """Quantities of a unit-variance correlation system ``R_eta = R + eta I``."""

    n: int
    logdet: float
    quad: float
    mean_b: float
    one_quad: float
    factor: Cholesky


def profile_terms(corr, z, eta=0.0, mean_b=0.0, estimate_mean=False):
    """Factor ``corr + eta I`` and form the quadratic form of the centred data.

    With ``estimate_mean`` the constant mean is the GLS estimate
    ``1' R^-1 z / 1' R^-1 1``; otherwise ``mean_b`` is subtracted.
    """
    r = corr if eta == 0 else corr + eta * np.eye(corr.shape[0])
    fac = factorize(r)
    n = z.shape[0]
    one = np.ones(n)
    if estimate_mean:
        u1 = fac.half_solve(one)
        uz = fac.half_solve(z)
        one_quad = float(u1 @ u1)
        b = float(u1 @ uz) / one_quad
        resid = uz - b * u1
    else:
        b = float(mean_b)
        resid = fac.half_solve(z - b)
        one_quad = float("nan")
    return ProfileTerms(n, fac.logdet, float(resid @ resid), b, one_quad, fac)


def profiled_loglik_from_terms(t):
    """Log-likelihood maximized over the variance: ``-(n log(2 pi s2) + log|R| + n)/2``."""
    s2 = t.quad / t.n
    return -0.5 * (t.n * math.log(2.0 * math.pi * s2) + t.logdet + t.n), s2


def reml_from_terms(t):
    """Restricted log-likelihood of a constant-mean model, variance profiled.

    ``-( (n-1) log(2 pi s2) + log|R| + log(1'R^-1 1) - log n + (n-1) ) / 2`` with
    ``s2 = (z - b1)' R^-1 (z - b1) / (n - 1)``; this is the likelihood of
    orthonormal error contrasts.
    """
    m = t.n - 1
    s2 = t.quad / m
    val = -0.5 * (
        m * math.log(2.0 * math.pi * s2) + t.logdet + math.log(t.one_quad) - math.log(t.n) + m
    )
    return val, s2


def _correlation_and_ratio(model, locs, lags=None):
    kernel = model.kernel
    unit = replace(kernel, sigma2=1.0)
    corr = (lags or PairLags(locs)).matrix(unit)
    return corr, model.nugget_tau2 / kernel.sigma2


def loglik(model, data, profile_sigma2=True, lags=None):
    """Gaussian log-likelihood of ``data`` under ``model``.

    Parameters
    ----------
    model : GPModel
    data : Dataset
    profile_sigma2 : bool
        If true, the variance is replaced by its closed-form maximizer
        ``(z-b)' R_eta^-1 (z-b) / n`` with the nugget held as the ratio
        ``eta = tau2 / sigma2``; otherwise the model's own variance is used.
    lags : PairLags, optional
        Precomputed lags of ``data.locs``.

    Returns
    -------
    value : float
    sigma2_hat : float or None
        Profiled variance, ``None`` when not profiling.
    """
    corr, eta = _correlation_and_ratio(model, data.locs, lags)
    t = profile_terms(corr, data.z, eta, model.mean_b, model.estimate_mean)
    if profile_sigma2:
        return profiled_loglik_from_terms(t)
    s2 = model.kernel.sigma2
    val = -0.5 * (t.n * math.log(2.0 * math.pi * s2) + t.logdet + t.quad / s2)
    return val, None


def reml_loglik(model, data, lags=None):
    """Profiled restricted log-likelihood for a constant mean.

    Returns
    -------
    value : float
    sigma2_hat : float
    b_hat : float
        GLS estimate of the constant mean.
    """
    if data.n < 2:
        raise DomainError("REML needs at least two observations")
    corr, eta = _correlation_and_ratio(model, data.locs, lags)
    t = profile_terms(corr, data.z, eta, estimate_mean=True)
    val, s2 = reml_from_terms(t)
    return val, s2, t.mean_b


def krige(model, data, targets, mean_correction=None):
    """Predict the noiseless process at ``targets``.

    The predictor is ``b + r' K^-1 (z - b 1)`` with ``K`` the covariance of the
    observations (nugget included) and ``r`` the nugget-free cross-covariance.
    Its variance is ``sigma2 - r' K^-1 r``, plus
    ``(1 - 1' K^-1 r)^2 / (1' K^-1 1)`` when the mean is estimated and
    ``mean_correction`` is on (default: the model's setting).  Targets that
    coincide with a training location of a nugget-free model return the
    observation with zero variance, the exact interpolation limit.
    """
    if mean_correction is None:
        mean_correction = model.mean_correction
    k = cov_matrix(model, data.locs)
    fac = factorize(k)
    r = cross_cov(model.kernel, data.locs, targets)
    z = data.z
    one = np.ones(data.n)
    w = fac.solve(r)
    if model.estimate_mean:
        k1 = fac.solve(one)
        b = float(k1 @ z) / float(k1 @ one)
    else:
        b = float(model.mean_b)
    mean = b + w.T @ (z - b)
    var = model.kernel.sigma2 - np.einsum("ij,ij->j", r, w)
    if model.estimate_mean and mean_correction:
        var = var + (1.0 - one @ w) ** 2 / float(k1 @ one)

    if model.nugget_tau2 == 0 and fac.jitter == 0:
        hit_t, hit_s = np.nonzero(cross_dist(targets, data.locs).T == 0)[::-1]
        mean[hit_t] = z[hit_s]
        var[hit_t] = 0.0

    sd = np.sqrt(np.maximum(var, 0.0))
    return PredictionResult(mean, sd, mean - Z95 * sd, mean + Z95 * sd)


def microergodic_ci(c_hat, n):
    """95% interval ``c_hat -/+ 1.96 sqrt(2 c_hat^2 / n)``."""
    half = Z95 * math.sqrt(2.0 / n) * c_hat
    return (c_hat - half, c_hat + half)


def microergodic_mle(theta, data, mean_b=0.0, lags=None):
    """Estimate ``c = sigma2 beta^(-2 nu) Gamma(nu+alpha) / Gamma(alpha)`` at fixed ``theta``.

    ``c_hat = (z-b)' R^-1 (z-b) Gamma(nu+alpha) / (n beta^(2 nu) Gamma(alpha))``
    with ``R`` the CH correlation of ``theta`` (its ``sigma2`` is ignored).

    Returns
    -------
    c_hat : float
    ci95 : tuple of float
    """
    if not isinstance(theta, CHParams):
        raise DomainError("microergodic_mle needs CH parameters")
    if data.n < 2:
        raise DomainError("microergodic_mle needs n >= 2")
    corr = (lags or PairLags(data.locs)).matrix(replace(theta, sigma2=1.0))
    t = profile_terms(corr, data.z, 0.0, mean_b, False)
    c_hat = c_hat_from_quad(t.quad, t.n, theta)
    return c_hat, microergodic_ci(c_hat, t.n)


def c_hat_from_quad(quad, n, theta):
    """``quad * Gamma(nu+alpha) / (n beta^(2 nu) Gamma(alpha))``."""
    log_c = (
        math.log(quad / n) + gammaln(theta.nu + theta.alpha) - gammaln(theta.alpha)
        - 2.0 * theta.nu * math.log(theta.beta)
    )
    return math.exp(log_c)
