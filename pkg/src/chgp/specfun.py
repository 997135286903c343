"""Special functions needed by the covariance kernels.

``log_gamma`` and ``bessel_k`` are validated wrappers over :mod:`scipy.special`.
``hyperg_u`` evaluates Tricomi's confluent hypergeometric function of the
second kind,

    U(a, b, x) = 1/Gamma(a) * int_0^inf t^(a-1) (1+t)^(b-a-1) exp(-x t) dt,

choosing per point between three routes, each of which checks its own
accuracy and hands the point on when the check fails:

1. the large-``x`` asymptotic series,
2. the Kummer connection formula through two ``1F1`` series (small ``x``,
   ``b`` away from the integers),
3. a double-exponential quadrature of the integral in ``s = log t``, centred on
   the mode of the integrand and scaled by its curvature, with an adaptive
   QUADPACK fallback.

Everything is carried in log space, so gamma-function prefactors for large
``a`` never overflow on their own.
"""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

__all__ = [
    "QuadratureConfig",
    "log_gamma",
    "bessel_k",
    "hyperg_u",
    "log_hyperg_u",
]

_EPS = np.finfo(float).eps
# Largest tolerated ratio sum|terms| / |result| in the connection formula.
_SERIES_MAX_COND = 1e2
_SERIES_MAX_X = 25.0
_SERIES_MAX_TERMS = 600
_ASYMPTOTIC_MIN_X = 8.0
_ASYMPTOTIC_MAX_TERMS = 120
# Log-integrand drop at which the quadrature tails are cut (e^-46 ~ 1e-20).
_TAIL_DROP = 46.0
_MIN_STEP = 1.0 / 64.0
_CHUNK = 8192
# Batches at least this large (same a, b) go through verified interpolation.
_INTERPOLATE_MIN_SIZE = 2048
_PANEL_WIDTH = 1.0
_PANEL_MIN_WIDTH = 1.0 / 64.0
_PANEL_NODES = 24
_PANEL_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances of the quadrature route of :func:`hyperg_u`.

    ``rel_tol``/``abs_tol`` bound the change between successive step halvings
    of the double-exponential rule (applied to the mode-normalised integral,
    which is of order one); ``max_subdivisions`` caps the QUADPACK fallback.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("abs_tol and rel_tol must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")


DEFAULT_QUADRATURE = QuadratureConfig()


def _as_output(values, like):
    if np.ndim(like) == 0:
        return float(np.asarray(values).reshape(()))
    return values


def log_gamma(x):
    """Natural log of the gamma function for positive, finite ``x``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr) & (arr > 0)):
        raise DomainError("log_gamma requires finite x > 0")
    return _as_output(special.gammaln(arr), x)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, ``K_nu(x)``.

    Overflow (tiny ``x`` with large ``nu``) is returned as ``+inf``.
    """
    if not (np.isfinite(nu) and nu > 0):
        raise DomainError(f"bessel_k requires nu > 0, got {nu!r}")
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0) or np.any(np.isnan(arr)):
        raise DomainError("bessel_k requires x > 0")
    with np.errstate(over="ignore"):
        out = special.kv(float(nu), arr)
    return _as_output(out, x)


def hyperg_u(a, b, x, config=None):
    """Confluent hypergeometric function of the second kind ``U(a, b, x)``.

    Parameters
    ----------
    a : float or array_like
        First parameter, ``a > 0``.
    b : float or array_like
        Second parameter, any real.
    x : float or array_like
        Argument, ``x > 0``.
    config : QuadratureConfig, optional
        Tolerances for the quadrature route.

    Returns
    -------
    float or ndarray
        ``U(a, b, x)``; ``+inf`` where the value exceeds the float range.

    Raises
    ------
    DomainError
        For ``a <= 0``, ``x <= 0`` or non-finite input.
    ConvergenceError
        When no route meets the tolerance.
    """
    with np.errstate(over="ignore"):
        out = np.exp(log_hyperg_u(a, b, x, config))
    return _as_output(out, out)


def log_hyperg_u(a, b, x, config=None):
    """Natural log of :func:`hyperg_u`; finite wherever ``U`` is."""
    cfg = DEFAULT_QUADRATURE if config is None else config
    a_arr, b_arr, x_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    if not (np.all(np.isfinite(a_arr)) and np.all(a_arr > 0)):
        raise DomainError("hyperg_u requires finite a > 0")
    if not np.all(np.isfinite(b_arr)):
        raise DomainError("hyperg_u requires finite b")
    if not (np.all(np.isfinite(x_arr)) and np.all(x_arr > 0)):
        raise DomainError("hyperg_u requires finite x > 0")

    shape = x_arr.shape
    a_flat, b_flat, x_flat = a_arr.ravel(), b_arr.ravel(), x_arr.ravel()
    out = np.empty(x_flat.shape)
    if x_flat.size == 0:
        return out.reshape(shape)
    if np.all(a_flat == a_flat[0]) and np.all(b_flat == b_flat[0]):
        out[:] = _log_u_fixed(float(a_flat[0]), float(b_flat[0]), x_flat, cfg)
    else:
        pairs = np.stack([a_flat, b_flat], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        for k, (ak, bk) in enumerate(uniq):
            sel = inverse == k
            out[sel] = _log_u_fixed(float(ak), float(bk), x_flat[sel], cfg)
    if np.ndim(a) == 0 and np.ndim(b) == 0 and np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(shape)


def _log_u_fixed(a, b, x, cfg):
    """log U(a, b, x) for scalar a, b and a 1-D array of x."""
    if x.size >= _INTERPOLATE_MIN_SIZE:
        return _log_u_interpolated(a, b, x, cfg)
    return _log_u_direct(a, b, x, cfg)


def _log_u_interpolated(a, b, x, cfg):
    """Piecewise Chebyshev interpolation of log U in log x, verified per panel.

    Each panel is fitted on Chebyshev nodes and checked against direct
    evaluation at the interleaved extrema; panels failing the check are
    halved, and below the minimum width their points are evaluated directly.
    All panels of one halving generation share a single direct evaluation.
    """
    logx = np.log(x)
    out = np.empty(x.shape)
    lo, hi = float(logx.min()), float(logx.max())
    n_panels = max(1, int(np.ceil((hi - lo) / _PANEL_WIDTH)))
    edges = np.linspace(lo, hi, n_panels + 1)
    panels = [(edges[i], edges[i + 1]) for i in range(n_panels)]
    k = np.arange(_PANEL_NODES)
    nodes_ref = np.cos((2 * k + 1) * np.pi / (2 * _PANEL_NODES))
    check_ref = np.cos(np.arange(1, _PANEL_NODES) * np.pi / _PANEL_NODES)
    ref = np.concatenate([nodes_ref, check_ref])
    n_fit = nodes_ref.size
    while panels:
        members = []
        for left, right in panels:
            inside = (logx >= left) & ((logx <= right) if right == hi else (logx < right))
            if np.any(inside):
                members.append((left, right, inside))
        if not members:
            break
        direct = [m for m in members if m[1] - m[0] < _PANEL_MIN_WIDTH]
        fitted = [m for m in members if m[1] - m[0] >= _PANEL_MIN_WIDTH]
        for _, _, inside in direct:
            out[inside] = _log_u_direct(a, b, x[inside], cfg)
        panels = []
        if not fitted:
            break
        mids = np.array([0.5 * (l + r) for l, r, _ in fitted])
        halves = np.array([0.5 * (r - l) for l, r, _ in fitted])
        pts = (mids[:, None] + halves[:, None] * ref[None, :]).ravel()
        vals = _log_u_direct(a, b, np.exp(pts), cfg).reshape(len(fitted), ref.size)
        for (left, right, inside), mid, half, v in zip(fitted, mids, halves, vals):
            coef = np.polynomial.chebyshev.chebfit(nodes_ref, v[:n_fit], _PANEL_NODES - 1)
            check = v[n_fit:]
            err = np.abs(np.polynomial.chebyshev.chebval(check_ref, coef) - check)
            if np.all(err <= _PANEL_TOL * (1.0 + np.abs(check))):
                out[inside] = np.polynomial.chebyshev.chebval((logx[inside] - mid) / half, coef)
            else:
                panels.extend([(left, mid), (mid, right)])
    return out


def _log_u_direct(a, b, x, cfg):
    out = np.full(x.shape, np.nan)
    pending = np.ones(x.shape, dtype=bool)

    # c = a - b + 1 a non-positive integer: the asymptotic series terminates.
    big = x >= _ASYMPTOTIC_MIN_X
    c = a - b + 1.0
    if c <= 0 and c == np.round(c):
        big = np.ones(x.shape, dtype=bool)
    if np.any(big):
        idx = np.flatnonzero(big)
        vals, ok = _log_asymptotic(a, b, x[idx])
        out[idx[ok]] = vals[ok]
        pending[idx[ok]] = False

    small = pending & (x <= _SERIES_MAX_X)
    if np.any(small):
        idx = np.flatnonzero(small)
        vals, ok = _log_connection_series(a, b, x[idx])
        out[idx[ok]] = vals[ok]
        pending[idx[ok]] = False

    if np.any(pending):
        idx = np.flatnonzero(pending)
        out[idx] = _log_quadrature(a, b, x[idx], cfg)
    return out


def _log_asymptotic(a, b, x):
    """Large-x expansion U ~ x^-a sum_k (a)_k (a-b+1)_k / k! (-x)^-k."""
    c = a - b + 1.0
    total = np.ones_like(x)
    term = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    failed = np.zeros(x.shape, dtype=bool)
    for k in range(_ASYMPTOTIC_MAX_TERMS):
        live = ~(done | failed)
        if not np.any(live):
            break
        ratio = -(a + k) * (c + k) / ((k + 1.0) * x[live])
        new = term[live] * ratio
        # An asymptotic series may only be truncated while its terms shrink.
        failed[live] = np.abs(new) > np.abs(term[live])
        live_ok = live.copy()
        live_ok[live] = ~failed[live]
        new = new[~failed[live]]
        term[live_ok] = new
        total[live_ok] += new
        done[live_ok] = np.abs(new) <= 0.25 * _EPS * np.abs(total[live_ok])
    ok = done & ~failed & (total > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = -a * np.log(x) + np.log(total)
    return vals, ok


def _kummer_m(a, b, x):
    """Kummer's M(a, b, x) by its power series, with the sum of |terms|."""
    total = np.ones_like(x)
    absolute = np.ones_like(x)
    term = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    # The terms can only be trusted to keep shrinking once b + k > 0.
    k_min = max(0, int(np.ceil(-b)) + 1)
    for k in range(_SERIES_MAX_TERMS):
        live = ~done
        if not np.any(live):
            break
        ratio = (a + k) * x[live] / ((b + k) * (k + 1.0))
        term[live] = term[live] * ratio
        total[live] += term[live]
        absolute[live] += np.abs(term[live])
        if k >= k_min:
            small = np.abs(term[live]) <= 0.25 * _EPS * absolute[live]
            shrinking = np.abs(ratio) < 0.5
            done[live] = (small & shrinking) | (term[live] == 0)
    return total, absolute, done


def _log_connection_series(a, b, x):
    """U = G(1-b)/G(a-b+1) M(a,b,x) + G(b-1)/G(a) x^(1-b) M(a-b+1,2-b,x)."""
    with np.errstate(all="ignore"):
        l1 = special.gammaln(1.0 - b) - special.gammaln(a - b + 1.0)
        s1 = special.gammasgn(1.0 - b) * special.gammasgn(a - b + 1.0)
        l2 = special.gammaln(b - 1.0) - special.gammaln(a)
        s2 = special.gammasgn(b - 1.0)
    if not (np.isfinite(l1) and np.isfinite(l2) and s1 != 0 and s2 != 0):
        return np.full(x.shape, np.nan), np.zeros(x.shape, dtype=bool)
    m1, m1_abs, ok1 = _kummer_m(a, b, x)
    m2, m2_abs, ok2 = _kummer_m(a - b + 1.0, 2.0 - b, x)
    with np.errstate(all="ignore"):
        e2_log = l2 + (1.0 - b) * np.log(x)
        scale = np.maximum(l1, e2_log)
        w1 = np.exp(l1 - scale)
        w2 = np.exp(e2_log - scale)
        total = s1 * w1 * m1 + s2 * w2 * m2
        absolute = w1 * m1_abs + w2 * m2_abs
        vals = scale + np.log(total)
    ok = ok1 & ok2 & (total > 0) & (absolute <= _SERIES_MAX_COND * total) & np.isfinite(vals)
    return vals, ok


def _log_integrand(s, a, c, x):
    # log of t^a (1+t)^-c exp(-x t) with t = e^s (the Jacobian dt = t ds included)
    with np.errstate(over="ignore", invalid="ignore"):
        val = a * s - c * np.logaddexp(0.0, s) - x * np.exp(s)
    return np.where(np.isnan(val), -np.inf, val)


def _mode(a, c, x):
    """Root of d/ds log-integrand: a - c*sigmoid(s) - x e^s = 0.

    The derivative tends to a > 0 as s -> -inf and to -inf as s -> +inf, and
    it has a single sign change, so a safeguarded Newton iteration on a
    bracket always converges.
    """
    # At hi, x e^s already exceeds a - c*sigmoid(s); at lo, both
    # c*sigmoid(s) <= c e^s and x e^s are below a/4.
    hi = np.log((a + max(0.0, -c)) / x) + 1e-9
    lo = np.log(a / (4.0 * x)) - 1.0
    if c > 0:
        lo = np.minimum(lo, np.log(a / (4.0 * c)) - 1.0)
    guess = np.log(a / x)
    if c > a:
        guess = np.minimum(guess, np.log(a / (c - a)))
    s = np.clip(guess, lo, hi)
    for _ in range(200):
        e = np.exp(s)
        sig = special.expit(s)
        g = a - c * sig - x * e
        dg = -c * sig * (1.0 - sig) - x * e
        lo = np.where(g > 0, s, lo)
        hi = np.where(g <= 0, s, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = s - g / dg
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(new - s) <= 1e-12 * (1.0 + np.abs(s))):
            return new
        s = new
    return s


def _log_quadrature(a, b, x, cfg):
    out = np.empty(x.shape)
    for start in range(0, x.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = _log_quadrature_chunk(a, b, x[sl], cfg)
    return out


def _log_quadrature_chunk(a, b, x, cfg):
    c = a - b + 1.0
    s0 = _mode(a, c, x)
    sig = special.expit(s0)
    curvature = c * sig * (1.0 - sig) + x * np.exp(s0)
    width = 1.0 / np.sqrt(np.maximum(curvature, 1e-300))
    g0 = _log_integrand(s0, a, c, x)

    # Half-width V of the v-interval, s = s0 + width * sinh(v).
    trial = np.arange(1.0, 13.0)[:, None]
    left = _log_integrand(s0 - width * np.sinh(trial), a, c, x) - g0 < -_TAIL_DROP
    right = _log_integrand(s0 + width * np.sinh(trial), a, c, x) - g0 < -_TAIL_DROP
    v_left = np.where(left.any(0), trial[np.argmax(left, 0), 0], trial[-1, 0])
    v_right = np.where(right.any(0), trial[np.argmax(right, 0), 0], trial[-1, 0])
    v_max = np.maximum(v_left, v_right)

    def scaled(v, rows):
        # mode-normalised integrand in v, one row per point
        s = s0[rows, None] + width[rows, None] * np.sinh(v)[None, :]
        q = _log_integrand(s, a, c, x[rows, None]) - g0[rows, None]
        return np.exp(q) * np.cosh(v)[None, :]

    h = 0.5
    n_half = int(np.ceil(v_max.max() / h))
    rows = np.arange(x.size)
    nodes = np.arange(-n_half, n_half + 1) * h
    total = scaled(nodes, rows).sum(axis=1) * h
    result = total.copy()
    active = np.ones(x.size, dtype=bool)
    while np.any(active) and h > _MIN_STEP:
        h *= 0.5
        odd = (2 * np.arange(-n_half, n_half) + 1) * h
        n_half *= 2
        rows = np.flatnonzero(active)
        refined = 0.5 * total[rows] + scaled(odd, rows).sum(axis=1) * h
        change = np.abs(refined - total[rows])
        total[rows] = refined
        result[rows] = refined
        converged = change <= cfg.rel_tol * refined + cfg.abs_tol
        active[rows[converged]] = False

    for i in np.flatnonzero(active):
        result[i] = _quadpack_fallback(a, c, x[i], s0[i], width[i], g0[i], v_max[i], cfg)

    with np.errstate(divide="ignore"):
        return g0 + np.log(width) + np.log(result) - special.gammaln(a)


def _quadpack_fallback(a, c, x, s0, width, g0, v_max, cfg):
    def f(v):
        s = s0 + width * np.sinh(v)
        return float(np.exp(_log_integrand(s, a, c, x) - g0) * np.cosh(v))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            f,
            -v_max,
            v_max,
            points=[0.0],
            epsabs=cfg.abs_tol,
            epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions,
        )
    if not err <= 10.0 * max(cfg.abs_tol, cfg.rel_tol * abs(val)):
        raise ConvergenceError(
            f"hyperg_u quadrature did not converge for a={a}, b={a + 1 - c}, x={x}"
            f" (error estimate {err:.3g})"
        )
    return val
