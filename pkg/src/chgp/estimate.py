"""Bounded maximum-likelihood and REML fitting of covariance parameters.

The smoothness (``nu`` for Matérn/CH, ``delta`` for GC) is never estimated.
The variance is profiled in closed form and, under REML or when the model
estimates its mean, so is the constant mean.  The remaining parameters are
searched by Nelder-Mead in log coordinates with reflection at the bounds,
restarted from several seeded points.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Optional

import numpy as np

from .design import latin_hypercube
from .errors import ConvergenceError, DecompositionError, DomainError, OptimizationError
from .gp import (
    FitResult,
    GPModel,
    PairLags,
    microergodic_ci,
    profile_terms,
    profiled_loglik_from_terms,
    reml_from_terms,
)
from .kernels import CHParams, GCParams, MaternParams, microergodic

__all__ = ["FitConfig", "ParamBox", "fit", "nelder_mead", "default_bounds", "free_parameters"]

OBJECTIVES = ("profile_ml", "reml")
NUGGET_MAX = 10.0
# Offset that lets log(eta + offset) cover eta = 0.
NUGGET_OFFSET = 1e-6

_FREE = {
    MaternParams: ("phi",),
    CHParams: ("alpha", "beta"),
    GCParams: ("lam", "phi"),
}


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    Parameters
    ----------
    objective : {"profile_ml", "reml"}
    bounds : dict, optional
        Per-parameter ``(low, high)`` overriding :func:`default_bounds`.
        Names: ``alpha``, ``beta``, ``phi``, ``lam``, ``eta`` (nugget ratio).
    fixed : dict, optional
        Parameters held at the given values instead of estimated.
    estimate_nugget : bool
        Estimate the nugget ratio ``eta = tau2 / sigma2`` in ``[0, 10]``.
    allow_small_alpha : bool
        Let the CH ``alpha`` lower bound drop to 1e-3 instead of ``d/2 + 1e-6``.
    n_starts, max_iters, x_tol, f_tol, seed
        Restart count, simplex iteration cap per start, stopping tolerances
        (simplex diameter in log coordinates, objective spread) and the seed
        of the restart design.
    start_from_template : bool
        Use the template's own values as the first start.
    """

    objective: str = "profile_ml"
    bounds: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    estimate_nugget: bool = False
    allow_small_alpha: bool = False
    n_starts: int = 5
    max_iters: int = 2000
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    seed: int = 0
    start_from_template: bool = True

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise DomainError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.n_starts < 1 or self.max_iters < 1:
            raise DomainError("n_starts and max_iters must be positive")
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise DomainError("tolerances must be positive")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise DomainError(f"bounds for {name} must satisfy low < high")


def free_parameters(kernel, cfg):
    """Names of the parameters :func:`fit` searches over, in search order."""
    try:
        names = _FREE[type(kernel)]
    except KeyError:
        raise DomainError(f"fitting supports Matérn, CH and GC kernels, got {kernel!r}")
    out = [n for n in names if n not in cfg.fixed]
    if cfg.estimate_nugget and "eta" not in cfg.fixed:
        out.append("eta")
    return tuple(out)


def default_bounds(kernel, locs, cfg):
    """Search box for every free parameter of ``kernel`` on ``locs``."""
    d = locs.dim
    diam = locs.diameter()
    if not diam > 0:
        raise DomainError("cannot fit on locations with zero diameter")
    alpha_lo = 1e-3 if cfg.allow_small_alpha else max(1e-3, d / 2.0 + 1e-6)
    box = {
        "alpha": (alpha_lo, 100.0),
        "beta": (1e-3 * diam, 1e3 * diam),
        "phi": (1e-3 * diam, 1e3 * diam),
        "lam": (1e-2, float(d)),
        "eta": (0.0, NUGGET_MAX),
    }
    box.update(cfg.bounds)
    return box


class ParamBox:
    """Map between named parameters and the unconstrained search vector.

    Positive parameters use ``y = log(p)``; the nugget ratio uses
    ``y = log(eta + 1e-6)`` so that ``eta = 0`` is reachable.
    """

    def __init__(self, names, bounds):
        self.names = tuple(names)
        self.bounds = {n: bounds[n] for n in names}
        lo, hi = [], []
        for n in names:
            a, b = bounds[n]
            if n != "eta" and not a > 0:
                raise DomainError(f"lower bound of {n} must be positive")
            lo.append(self._to_y(n, a))
            hi.append(self._to_y(n, b))
        self.lower = np.array(lo)
        self.upper = np.array(hi)

    @staticmethod
    def _to_y(name, value):
        return math.log(value + NUGGET_OFFSET) if name == "eta" else math.log(value)

    def to_y(self, params):
        return np.array([self._to_y(n, params[n]) for n in self.names])

    def to_params(self, y):
        out = {}
        for n, v in zip(self.names, y):
            val = math.exp(v) - NUGGET_OFFSET if n == "eta" else math.exp(v)
            lo, hi = self.bounds[n]
            out[n] = min(max(val, lo), hi)
        return out

    def reflect(self, y):
        """Fold ``y`` back into the box by mirror reflection at its faces."""
        y = np.where(np.isfinite(y), y, self.lower)
        width = self.upper - self.lower
        t = np.mod(y - self.lower, 2.0 * width)
        t = np.where(t > width, 2.0 * width - t, t)
        return self.lower + t

    def clip(self, y):
        return np.clip(y, self.lower, self.upper)


@dataclass
class SimplexResult:
    y: np.ndarray
    f: float
    n_evals: int
    converged: bool


def nelder_mead(func, y0, box, max_iters=2000, x_tol=1e-8, f_tol=1e-10, step=None):
    """Minimize ``func`` by Nelder-Mead with trial points reflected into ``box``.

    Stops when the simplex diameter (max-norm) drops below ``x_tol`` or the
    spread of vertex values drops below ``f_tol``.
    """
    dim = len(y0)
    width = box.upper - box.lower
    if step is None:
        step = np.minimum(0.5, 0.25 * width)
    verts = [box.reflect(np.asarray(y0, dtype=float))]
    for i in range(dim):
        v = verts[0].copy()
        v[i] = v[i] + step[i] if v[i] + step[i] <= box.upper[i] else v[i] - step[i]
        verts.append(box.reflect(v))
    verts = np.array(verts)
    vals = np.array([func(v) for v in verts])
    n_evals = dim + 1
    converged = False
    for _ in range(max_iters):
        order = np.argsort(vals, kind="stable")
        verts, vals = verts[order], vals[order]
        diameter = np.max(np.abs(verts[1:] - verts[0])) if dim else 0.0
        spread = vals[-1] - vals[0] if np.isfinite(vals[-1]) else math.inf
        if diameter < x_tol or spread < f_tol:
            converged = True
            break
        centroid = verts[:-1].mean(axis=0)
        worst = verts[-1]
        xr = box.reflect(centroid + (centroid - worst))
        fr = func(xr)
        n_evals += 1
        if fr < vals[0]:
            xe = box.reflect(centroid + 2.0 * (centroid - worst))
            fe = func(xe)
            n_evals += 1
            if fe < fr:
                verts[-1], vals[-1] = xe, fe
            else:
                verts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            verts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = box.reflect(centroid + 0.5 * (xr - centroid))
        else:
            xc = box.reflect(centroid + 0.5 * (worst - centroid))
        fc = func(xc)
        n_evals += 1
        if fc < min(fr, vals[-1]):
            verts[-1], vals[-1] = xc, fc
            continue
        for i in range(1, dim + 1):
            verts[i] = box.reflect(verts[0] + 0.5 * (verts[i] - verts[0]))
            vals[i] = func(verts[i])
        n_evals += dim
    best = int(np.argmin(vals))
    return SimplexResult(verts[best].copy(), float(vals[best]), n_evals, converged)


def _kernel_with(template, params):
    kw = {k: v for k, v in params.items() if k != "eta"}
    return replace(template, sigma2=1.0, **kw)


def _template_values(kernel, names, cfg):
    vals = {}
    for n in names:
        if n == "eta":
            vals[n] = 0.0
        else:
            vals[n] = getattr(kernel, n)
    return vals


def fit(template, data, cfg=None):
    """Fit the free covariance parameters of ``template`` to ``data``.

    Parameters
    ----------
    template : GPModel
        Supplies the family, the fixed smoothness and starting values.  Its
        ``estimate_mean`` flag selects GLS-profiled versus known mean under
        ``profile_ml``; REML always profiles the mean.
    data : Dataset
    cfg : FitConfig, optional

    Returns
    -------
    FitResult
        ``loglik`` is the maximized objective; for CH kernels the result
        carries ``c(theta_hat)`` and its 95% interval.

    Raises
    ------
    OptimizationError
        If every start fails to produce a finite objective value.
    """
    cfg = cfg or FitConfig()
    if data.n < 3:
        raise DomainError("fitting needs at least three observations")
    kernel = template.kernel
    names = free_parameters(kernel, cfg)
    bounds = default_bounds(kernel, data.locs, cfg)
    for n, v in cfg.fixed.items():
        if n not in _FREE[type(kernel)] + ("eta",):
            raise DomainError(f"cannot fix unknown parameter {n!r} for {type(kernel).__name__}")
    reml = cfg.objective == "reml"
    estimate_mean = reml or template.estimate_mean
    lags = PairLags(data.locs)
    z = data.z
    fixed = dict(cfg.fixed)
    fixed_eta = fixed.pop("eta", None)
    if fixed_eta is None and not cfg.estimate_nugget:
        fixed_eta = template.nugget_ratio
    evals = {"n": 0}

    def evaluate(params):
        full = dict(fixed, **params)
        eta = full.get("eta", fixed_eta)
        corr = lags.matrix(_kernel_with(kernel, full))
        t = profile_terms(corr, z, eta, template.mean_b, estimate_mean)
        val, s2 = reml_from_terms(t) if reml else profiled_loglik_from_terms(t)
        return val, s2, t.mean_b, eta

    if not names:
        val, s2, b, eta = evaluate({})
        return _result(template, kernel, fixed, {}, val, s2, b, eta, estimate_mean, cfg, 1, True, data.n)

    box = ParamBox(names, bounds)

    def objective(y):
        evals["n"] += 1
        try:
            val = evaluate(box.to_params(y))[0]
        except (DecompositionError, ConvergenceError, FloatingPointError, ValueError):
            return math.inf
        return -val if math.isfinite(val) else math.inf

    starts = []
    if cfg.start_from_template:
        starts.append(box.clip(box.to_y(_template_values(kernel, names, cfg))))
    n_random = cfg.n_starts - len(starts)
    if n_random > 0:
        unit = latin_hypercube(n_random, len(names), np.random.default_rng(cfg.seed))
        starts.extend(box.lower + unit[i] * (box.upper - box.lower) for i in range(n_random))

    best = None
    all_converged = True
    for y0 in starts:
        res = nelder_mead(objective, y0, box, cfg.max_iters, cfg.x_tol, cfg.f_tol)
        all_converged &= res.converged
        if best is None or res.f < best.f:
            best = res
    if not math.isfinite(best.f):
        raise OptimizationError("no start produced a finite objective", best=best)
    params = box.to_params(best.y)
    val, s2, b, eta = evaluate(params)
    return _result(
        template, kernel, fixed, params, val, s2, b, eta, estimate_mean, cfg,
        evals["n"], bool(all_converged), data.n,
    )


def _result(template, kernel, fixed, params, val, s2, b, eta, estimate_mean, cfg, n_evals, conv, n):
    full = dict(fixed, **params)
    fitted = replace(_kernel_with(kernel, full), sigma2=s2)
    model = replace(
        template,
        kernel=fitted,
        mean_b=b,
        nugget_tau2=eta * s2,
        estimate_mean=estimate_mean,
    )
    c_hat: Optional[float] = None
    ci = None
    if isinstance(fitted, CHParams):
        c_hat = microergodic(fitted)
        ci = microergodic_ci(c_hat, n)
    free = {k: full[k] for k in params}
    return FitResult(model, val, cfg.objective, c_hat, ci, n_evals, conv, free)
