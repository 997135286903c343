"""Covariance families: Matérn, confluent hypergeometric (CH), generalized
Cauchy (GC) and tensor products of one-dimensional members.

All parameter sets are immutable dataclasses.  Isotropic kernels take a
distance ``h`` (scalar or array) and return the covariance at that lag.  The
module also provides spectral densities, the large-lag tail laws, effective
range calibration, the microergodic parameter of the CH family and the
equivalence predicates built on it.
"""

from dataclasses import dataclass, replace
import math
from typing import Tuple, Union
import warnings

import numpy as np
from scipy import integrate, optimize, special

from .errors import BracketError, ConvergenceError, DomainError
from .specfun import bessel_k, log_gamma, log_hyperg_u

__all__ = [
    "MaternParams",
    "CHParams",
    "GCParams",
    "TensorSpec",
    "KernelSpec",
    "SpectralTailConstants",
    "matern_cov",
    "ch_cov",
    "ch_tail_approx",
    "ch_mixture_cov",
    "gc_cov",
    "tensor_cov",
    "covariance",
    "correlation",
    "matern_spectral",
    "ch_spectral",
    "ch_spectral_tail",
    "effective_range",
    "with_effective_range",
    "microergodic",
    "equivalence_check",
    "matern_limit_of_ch",
    "equivalent_ch",
    "gc_delta_for",
    "family_name",
]

ER_LEVEL = 0.05


def _check_positive(**values):
    for name, v in values.items():
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class MaternParams:
    """Matérn kernel ``sigma2 * 2^(1-nu)/Gamma(nu) * u^nu K_nu(u)``, ``u = sqrt(2 nu) h / phi``."""

    nu: float
    phi: float
    sigma2: float = 1.0

    def __post_init__(self):
        _check_positive(nu=self.nu, phi=self.phi, sigma2=self.sigma2)


@dataclass(frozen=True)
class CHParams:
    """CH kernel ``sigma2 * Gamma(nu+alpha)/Gamma(nu) * U(alpha, 1-nu, nu h^2/beta^2)``."""

    nu: float
    alpha: float
    beta: float
    sigma2: float = 1.0

    def __post_init__(self):
        _check_positive(nu=self.nu, alpha=self.alpha, beta=self.beta, sigma2=self.sigma2)


@dataclass(frozen=True)
class GCParams:
    """Generalized Cauchy kernel ``sigma2 * (1 + (h/phi)^delta)^(-lam/delta)``."""

    delta: float
    lam: float
    phi: float
    sigma2: float = 1.0

    def __post_init__(self):
        _check_positive(delta=self.delta, lam=self.lam, phi=self.phi, sigma2=self.sigma2)
        if self.delta > 2:
            raise DomainError(f"GC delta must lie in (0, 2], got {self.delta}")


@dataclass(frozen=True)
class TensorSpec:
    """Separable kernel ``sigma2 * prod_i R_i(|s_i - u_i|)``.

    Each component is a unit-variance isotropic parameter set acting on one
    coordinate; the overall variance lives only in ``sigma2``.
    """

    components: Tuple[Union[MaternParams, CHParams, GCParams], ...]
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        _check_positive(sigma2=self.sigma2)
        if not 1 <= len(self.components) <= 3:
            raise DomainError("a tensor kernel needs between 1 and 3 components")
        for comp in self.components:
            if not isinstance(comp, (MaternParams, CHParams, GCParams)):
                raise DomainError(f"unsupported tensor component {comp!r}")
            if comp.sigma2 != 1.0:
                raise DomainError("tensor components must have unit variance")

    @property
    def dim(self):
        return len(self.components)


KernelSpec = Union[MaternParams, CHParams, GCParams, TensorSpec]


@dataclass(frozen=True)
class SpectralTailConstants:
    """High-frequency law ``f(w) ~ amplitude * w^-exponent * L(w^2)``.

    ``L(x) = (x / (x + slow_vary_shift))^slow_vary_power`` is slowly varying.
    """

    amplitude: float
    exponent: float
    slow_vary_shift: float
    slow_vary_power: float

    def slowly_varying(self, x):
        x = np.asarray(x, dtype=float)
        return (x / (x + self.slow_vary_shift)) ** self.slow_vary_power

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.amplitude * omega ** (-self.exponent) * self.slowly_varying(omega**2)


def family_name(spec):
    """Short family label: ``"matern"``, ``"ch"``, ``"gc"`` or ``"tensor"``."""
    if isinstance(spec, MaternParams):
        return "matern"
    if isinstance(spec, CHParams):
        return "ch"
    if isinstance(spec, GCParams):
        return "gc"
    if isinstance(spec, TensorSpec):
        return "tensor"
    raise DomainError(f"not a kernel spec: {spec!r}")


def _lags(h):
    arr = np.asarray(h, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("lags must be nonnegative")
    return arr


def _scalar_or_array(values, h):
    return float(values) if np.ndim(h) == 0 else values


_MATERN_CLOSED = {
    0.5: lambda u: np.exp(-u),
    1.5: lambda u: (1.0 + u) * np.exp(-u),
    2.5: lambda u: (1.0 + u + u * u / 3.0) * np.exp(-u),
}


def matern_cov(h, p):
    """Matérn covariance at lag(s) ``h``.

    Half-integer smoothness 1/2, 3/2, 5/2 uses the elementary closed forms;
    other values go through ``K_nu`` in exponentially scaled form.
    """
    h_arr = _lags(h)
    u = math.sqrt(2.0 * p.nu) * h_arr / p.phi
    out = np.ones_like(u)
    pos = u > 0
    if p.nu in _MATERN_CLOSED:
        out[pos] = _MATERN_CLOSED[p.nu](u[pos])
    else:
        up = u[pos]
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            log_k = np.log(special.kve(p.nu, up)) - up
            log_r = (1.0 - p.nu) * math.log(2.0) - special.gammaln(p.nu) + p.nu * np.log(up) + log_k
            out[pos] = np.exp(np.minimum(log_r, 0.0))
        # kve underflows long after the correlation is below 1e-300
        out[pos & ~np.isfinite(out)] = 0.0
    return _scalar_or_array(p.sigma2 * out, h)


def matern_cov_bessel(h, p):
    """Matérn covariance through ``bessel_k`` only (no closed forms)."""
    h_arr = _lags(h)
    u = math.sqrt(2.0 * p.nu) * h_arr / p.phi
    out = np.ones_like(u)
    pos = u > 0
    if np.any(pos):
        coef = math.exp((1.0 - p.nu) * math.log(2.0) - log_gamma(p.nu))
        out[pos] = coef * u[pos] ** p.nu * bessel_k(p.nu, u[pos])
    return _scalar_or_array(p.sigma2 * out, h)


def ch_cov(h, p, config=None):
    """CH covariance at lag(s) ``h``; exactly ``sigma2`` at ``h = 0``."""
    h_arr = _lags(h)
    out = np.ones(h_arr.shape)
    pos = h_arr > 0
    if np.any(pos):
        x = p.nu * (h_arr[pos] / p.beta) ** 2
        log_pref = special.gammaln(p.nu + p.alpha) - special.gammaln(p.nu)
        out[pos] = np.exp(log_pref + log_hyperg_u(p.alpha, 1.0 - p.nu, x, config))
    return _scalar_or_array(p.sigma2 * out, h)


def ch_mixture_cov(h, p, epsabs=0.0, epsrel=1e-11):
    """CH covariance from its scale-mixture integral, by adaptive quadrature.

    Evaluates ``sigma2 * beta^(2 alpha) Gamma(nu+alpha) / (Gamma(nu) Gamma(alpha))
    * int_0^inf x^(nu-1) (x + beta^2)^-(nu+alpha) exp(-nu h^2 / x) dx`` with
    ``x = beta^2 e^s``.  Independent of :func:`ch_cov`; used as its check.
    """
    h_arr = np.atleast_1d(_lags(h))
    nu, a, b2 = p.nu, p.alpha, p.beta**2
    log_pref = (
        special.gammaln(nu + a) - special.gammaln(nu) - special.gammaln(a)
    )
    out = np.empty(h_arr.shape)
    for i, hv in enumerate(h_arr.ravel()):
        if hv == 0:
            out.flat[i] = 1.0
            continue
        q = nu * hv * hv / b2

        def log_f(s):
            # x = b2 e^s; the b2 powers cancel against the prefactor
            return nu * s - (nu + a) * np.logaddexp(0.0, s) - q * np.exp(-s)

        s0 = optimize.minimize_scalar(lambda s: -log_f(s), bracket=(-5.0, 5.0)).x
        m = log_f(s0)
        lo, hi = s0 - 1.0, s0 + 1.0
        while log_f(lo) - m > -50.0:
            lo -= 2.0 * (s0 - lo)
        while log_f(hi) - m > -50.0:
            hi += 2.0 * (hi - s0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(
                lambda s: math.exp(log_f(s) - m), lo, hi, points=[s0],
                epsabs=epsabs, epsrel=epsrel, limit=500,
            )
        out.flat[i] = math.exp(log_pref + m) * val
    out = p.sigma2 * out.reshape(np.shape(h_arr))
    return float(out[0]) if np.ndim(h) == 0 else out.reshape(np.shape(h))


def ch_tail_approx(h, p):
    """Large-lag law ``sigma2 beta^(2a) Gamma(nu+a) / (nu^a Gamma(nu)) h^(-2a) L(h^2)``.

    ``L(x) = (x / (x + beta^2/(2 nu)))^(nu+a)``.  An approximation, accurate
    only as ``h / beta`` grows.
    """
    h_arr = np.asarray(h, dtype=float)
    if np.any(~(h_arr > 0)):
        raise DomainError("tail approximation needs h > 0")
    nu, a, beta = p.nu, p.alpha, p.beta
    x = h_arr**2
    log_c = (
        math.log(p.sigma2) + 2 * a * math.log(beta) + special.gammaln(nu + a)
        - a * math.log(nu) - special.gammaln(nu)
    )
    log_l = (nu + a) * (np.log(x) - np.log(x + beta**2 / (2 * nu)))
    return _scalar_or_array(np.exp(log_c - 2 * a * np.log(h_arr) + log_l), h)


def gc_cov(h, p):
    """Generalized Cauchy covariance at lag(s) ``h``."""
    h_arr = _lags(h)
    out = np.exp(-(p.lam / p.delta) * np.log1p((h_arr / p.phi) ** p.delta))
    return _scalar_or_array(p.sigma2 * out, h)


def covariance(spec, h):
    """Covariance of an isotropic spec at lag(s) ``h``."""
    if isinstance(spec, MaternParams):
        return matern_cov(h, spec)
    if isinstance(spec, CHParams):
        return ch_cov(h, spec)
    if isinstance(spec, GCParams):
        return gc_cov(h, spec)
    if isinstance(spec, TensorSpec):
        raise DomainError("tensor kernels are not isotropic; use tensor_cov")
    raise DomainError(f"not a kernel spec: {spec!r}")


def correlation(spec, h):
    """Correlation (covariance over ``sigma2``) of an isotropic spec."""
    return covariance(replace(spec, sigma2=1.0), h)


def tensor_cov(s, u, spec):
    """Covariance between coordinates ``s`` and ``u`` under a tensor kernel.

    ``s`` and ``u`` are arrays whose last axis has length ``spec.dim``; leading
    axes broadcast.
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    if s.shape[-1:] != (spec.dim,) or u.shape[-1:] != (spec.dim,):
        raise DomainError(
            f"tensor kernel of arity {spec.dim} got coordinates of shape {s.shape} and {u.shape}"
        )
    diff = np.abs(s - u)
    out = np.full(diff.shape[:-1], spec.sigma2)
    for i, comp in enumerate(spec.components):
        out = out * covariance(comp, diff[..., i])
    return float(out) if out.ndim == 0 else out


def _check_dim(d):
    if d not in (1, 2, 3):
        raise DomainError(f"spectral densities are provided for d in {{1, 2, 3}}, got {d!r}")


def _log_matern_spectral_const(nu, sigma2, d):
    return (
        math.log(sigma2) + special.gammaln(nu + d / 2.0) - special.gammaln(nu)
        - (d / 2.0) * math.log(math.pi)
    )


def matern_spectral(omega, p, d):
    """Isotropic Matérn spectral density in ``R^d``.

    ``f(w) = sigma2 Gamma(nu+d/2) / (Gamma(nu) pi^(d/2)) kappa^(2 nu) / (kappa^2 + w^2)^(nu+d/2)``
    with ``kappa^2 = 2 nu / phi^2``, normalised so that ``int_{R^d} f = sigma2``.
    """
    _check_dim(d)
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("frequency magnitude must be nonnegative")
    k2 = 2.0 * p.nu / p.phi**2
    log_f = (
        _log_matern_spectral_const(p.nu, p.sigma2, d) + p.nu * math.log(k2)
        - (p.nu + d / 2.0) * np.log(k2 + w**2)
    )
    return _scalar_or_array(np.exp(log_f), omega)


def ch_spectral(omega, p, d, rel_tol=1e-8):
    """CH spectral density in ``R^d`` by mixing the Matérn density.

    With ``u = 1/phi^2 ~ Gamma(alpha, rate beta^2/2)`` the density is
    ``E[f_Matern(w; phi)]``.  The integral is taken in ``s = log u``, centred
    on the mode of the integrand.  Finite only for ``alpha > d/2``.
    """
    _check_dim(d)
    if not p.alpha > d / 2.0:
        raise DomainError(
            f"CH spectral density is infinite at the origin unless alpha > d/2 "
            f"(alpha={p.alpha}, d={d})"
        )
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w < 0) or np.any(~np.isfinite(w)):
        raise DomainError("frequency magnitude must be finite and nonnegative")
    nu, a, half_b2 = p.nu, p.alpha, p.beta**2 / 2.0
    m = nu + d / 2.0
    log_const = (
        _log_matern_spectral_const(nu, p.sigma2, d) + nu * math.log(2.0 * nu)
        + a * math.log(half_b2) - special.gammaln(a)
    )
    out = np.empty(w.shape)
    for i, wi in enumerate(w.ravel()):
        w2 = wi * wi

        def log_f(s):
            return (nu + a) * s - half_b2 * math.exp(s) - m * np.logaddexp(math.log(2.0 * nu) + s, math.log(w2) if w2 > 0 else -np.inf)

        def dlog_f(s):
            e = math.exp(s)
            return (nu + a) - half_b2 * e - m * 2.0 * nu * e / (2.0 * nu * e + w2)

        # dlog_f decreases from nu + a > 0 to -inf; bracket and solve.
        lo, hi = -1.0, 1.0
        while dlog_f(lo) <= 0:
            lo -= 2.0 * abs(lo) + 1.0
        while dlog_f(hi) >= 0:
            hi += 2.0 * abs(hi) + 1.0
        s0 = optimize.brentq(dlog_f, lo, hi, xtol=1e-12)
        g0 = log_f(s0)
        left, right = s0 - 1.0, s0 + 1.0
        while log_f(left) - g0 > -46.0:
            left = s0 - 2.0 * (s0 - left)
        while log_f(right) - g0 > -46.0:
            right = s0 + 2.0 * (right - s0)
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(
                    lambda s: math.exp(log_f(s) - g0), left, right, points=[s0],
                    epsabs=0.0, epsrel=rel_tol, limit=200,
                )
            except integrate.IntegrationWarning as exc:
                raise ConvergenceError(f"CH spectral quadrature failed at omega={wi}: {exc}")
        out.flat[i] = math.exp(log_const + g0) * val
    return float(out[0]) if np.ndim(omega) == 0 else out.reshape(np.shape(omega))


def ch_spectral_tail(p, d):
    """High-frequency law of :func:`ch_spectral`.

    ``amplitude = sigma2 2^(2 nu) nu^nu Gamma(nu+alpha) / (pi^(d/2) beta^(2 nu) Gamma(alpha))
    * Gamma(nu+d/2)/Gamma(nu)``; the last factor is the Matérn normalisation
    used by :func:`matern_spectral`.
    """
    _check_dim(d)
    nu, a = p.nu, p.alpha
    log_amp = (
        math.log(p.sigma2) + 2 * nu * math.log(2.0) + nu * math.log(nu)
        + special.gammaln(nu + a) - (d / 2.0) * math.log(math.pi)
        - 2 * nu * math.log(p.beta) - special.gammaln(a)
        + special.gammaln(nu + d / 2.0) - special.gammaln(nu)
    )
    return SpectralTailConstants(
        amplitude=math.exp(log_amp),
        exponent=2 * nu + d,
        slow_vary_shift=p.beta**2 / (2 * nu),
        slow_vary_power=nu + d / 2.0,
    )


_SCALE_FIELD = {MaternParams: "phi", CHParams: "beta", GCParams: "phi"}


def effective_range(spec, target_er, level=ER_LEVEL):
    """Scale parameter giving correlation ``level`` at distance ``target_er``.

    Returns ``phi`` (Matérn, GC) or ``beta`` (CH); the scale already stored in
    ``spec`` is ignored.  The bracket starts at ``[1e-3, 1e3] * target_er``
    and widens geometrically up to ``[1e-8, 1e8] * target_er``.
    """
    field = _SCALE_FIELD.get(type(spec))
    if field is None:
        raise DomainError(f"effective range is defined for isotropic specs, got {spec!r}")
    if not (target_er > 0 and math.isfinite(target_er)):
        raise DomainError("target_er must be positive")
    base = replace(spec, sigma2=1.0)

    def gap(log_scale):
        trial = replace(base, **{field: target_er * math.exp(log_scale)})
        return float(covariance(trial, target_er)) - level

    # Correlation at a fixed distance increases with the scale parameter.
    lo, hi = math.log(1e-3), math.log(1e3)
    limit = math.log(1e8)
    while gap(lo) > 0 and lo > -limit:
        lo = max(lo - 2.0 * abs(lo), -limit)
    while gap(hi) < 0 and hi < limit:
        hi = min(hi + 2.0 * abs(hi), limit)
    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo <= 0 <= g_hi):
        raise BracketError(
            f"correlation {level} at distance {target_er} is not attainable for {spec!r}"
        )
    root = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return target_er * math.exp(root)


def with_effective_range(spec, target_er, level=ER_LEVEL):
    """Copy of ``spec`` with its scale solved by :func:`effective_range`."""
    field = _SCALE_FIELD[type(spec)]
    return replace(spec, **{field: effective_range(spec, target_er, level)})


def log_microergodic(p):
    """Natural log of :func:`microergodic`."""
    return (
        math.log(p.sigma2) - 2 * p.nu * math.log(p.beta)
        + special.gammaln(p.nu + p.alpha) - special.gammaln(p.alpha)
    )


def microergodic(p):
    """``c = sigma2 beta^(-2 nu) Gamma(nu+alpha) / Gamma(alpha)`` of a CH spec."""
    if not isinstance(p, CHParams):
        raise DomainError("microergodic parameter is defined for CH specs")
    return math.exp(log_microergodic(p))


def _log_high_frequency_scale(p):
    # log of the quantity the equivalence conditions compare
    if isinstance(p, CHParams):
        return (
            math.log(p.sigma2) - p.nu * math.log(p.beta**2 / 2.0)
            + special.gammaln(p.nu + p.alpha) - special.gammaln(p.alpha)
        )
    if isinstance(p, MaternParams):
        return math.log(p.sigma2) - 2 * p.nu * math.log(p.phi)
    raise DomainError(f"equivalence is defined for CH and Matérn specs, got {p!r}")


def equivalence_check(p1, p2, rel_tol=1e-8):
    """Whether two CH/Matérn specs induce equivalent Gaussian measures.

    Compares ``sigma2 (beta^2/2)^-nu Gamma(nu+alpha)/Gamma(alpha)`` for CH and
    ``sigma2 phi^(-2 nu)`` for Matérn.  For two CH specs this is the same as
    comparing microergodic parameters.

    Returns
    -------
    equivalent : bool
    residual : float
        Signed relative difference ``q1 / q2 - 1``.
    """
    if p1.nu != p2.nu:
        raise DomainError("equivalence checks require equal smoothness nu")
    if isinstance(p1, MaternParams) and isinstance(p2, MaternParams):
        raise DomainError("equivalence check needs at least one CH spec")
    residual = math.expm1(_log_high_frequency_scale(p1) - _log_high_frequency_scale(p2))
    return abs(residual) <= rel_tol, residual


def matern_limit_of_ch(gamma, nu, sigma2, alpha):
    """CH spec whose kernel tends to ``Matérn(nu, gamma, sigma2)`` as alpha grows.

    Uses ``beta = sqrt(2 (alpha + 1)) * gamma``.
    """
    _check_positive(gamma=gamma, alpha=alpha)
    return CHParams(nu=nu, alpha=alpha, beta=math.sqrt(2.0 * (alpha + 1.0)) * gamma, sigma2=sigma2)


def equivalent_ch(matern, alpha, beta):
    """CH spec with the given ``alpha``, ``beta`` equivalent to a Matérn spec.

    The variance solves ``sigma2 (beta^2/2)^-nu Gamma(nu+alpha)/Gamma(alpha)
    = sigma2_M phi^(-2 nu)``.
    """
    _check_positive(alpha=alpha, beta=beta)
    nu = matern.nu
    log_s2 = (
        math.log(matern.sigma2) - 2 * nu * math.log(matern.phi)
        + nu * math.log(beta**2 / 2.0) + special.gammaln(alpha) - special.gammaln(nu + alpha)
    )
    return CHParams(nu=nu, alpha=alpha, beta=beta, sigma2=math.exp(log_s2))


def gc_delta_for(nu):
    """GC smoothness matching Matérn/CH smoothness: ``min(2 nu, 2)``."""
    return min(2.0 * nu, 2.0)
