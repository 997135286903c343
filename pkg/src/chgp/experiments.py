"""Monte Carlo harnesses: prediction comparisons across kernel families, the
sampling behaviour of the microergodic estimator, prediction efficiency under
equivalent measures, coupled 1-D realizations and a special-function timing
benchmark.

Every random quantity is drawn from a stream keyed by the study seed and the
work item (replicate, sample size), so results do not depend on execution
order or thread count.  Tables are written as CSV and a JSON manifest; the
wall time goes to a separate ``runtime.json`` so that the tables and the
manifest are byte-reproducible.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import math
import os
import platform
import time
from typing import Tuple

import numpy as np
import scipy

from . import __version__
from .design import Locations, maximin_lhs, regular_grid
from .errors import ConvergenceError, DecompositionError, DomainError, OptimizationError
from .estimate import FitConfig, fit
from .gp import Dataset, GPModel, PairLags, cross_cov, factorize, kernel_matrix, krige, microergodic_mle
from .io import kernel_to_dict, write_json, write_table
from .kernels import (
    CHParams,
    GCParams,
    MaternParams,
    correlation,
    family_name,
    gc_delta_for,
    microergodic,
    with_effective_range,
)
from .simulate import stream
from .specfun import bessel_k, hyperg_u

__all__ = [
    "StudySpec",
    "PredictionStudyResult",
    "case_study_spec",
    "run_prediction_study",
    "paired_ratio_median",
    "ASYMPTOTIC_MODES",
    "run_asymptotic_study",
    "run_efficiency_study",
    "run_timing_bench",
    "export_realizations_1d",
]

FAILURES = (OptimizationError, DecompositionError, ConvergenceError, FloatingPointError)
NORMAL_PERCENTILES = (-1.6448536269514729, -0.6744897501960817, 0.0, 0.6744897501960817, 1.6448536269514729)


def _map(func, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(i) for i in items]


def _environment():
    return {
        "package": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def smoothness_of(kernel):
    """Matérn-scale smoothness: ``nu`` for Matérn/CH, ``delta/2`` for GC."""
    if isinstance(kernel, GCParams):
        return kernel.delta / 2.0
    return kernel.nu


# ---------------------------------------------------------------------------
# prediction studies


@dataclass(frozen=True)
class StudySpec:
    """A prediction comparison: one truth, several fitted families.

    Parameters
    ----------
    case_id : str
    truth : MaternParams, CHParams or GCParams
        Zero-mean, nugget-free data-generating kernel.
    candidates : tuple of str
        Families to fit, among ``"matern"``, ``"ch"``, ``"gc"``.  Matérn and CH
        take the truth's smoothness; GC takes ``delta = min(2 nu, 2)``.
    effective_range : float
        Used to build starting values for every candidate.
    n_train, n_reps, seed
    design : {"maximin_lhs", "grid"}
        Training design, fixed across replicates.
    domain : tuple of (low, high)
    target_counts : tuple of int
        Regular grid of prediction targets.
    n_lags : int
        Lags at which fitted correlation curves are reported.
    fixed_truth : bool
        Predict with the truth itself instead of fitting (calibration check).
    fit_config : FitConfig
    lhs_candidates : int
    threads : int
    """

    case_id: str
    truth: object
    candidates: Tuple[str, ...] = ("matern", "ch", "gc")
    effective_range: float = 400.0
    n_train: int = 500
    n_reps: int = 30
    seed: int = 20240
    design: str = "maximin_lhs"
    domain: Tuple[Tuple[float, float], ...] = ((0.0, 2000.0), (0.0, 2000.0))
    target_counts: Tuple[int, ...] = (10, 10)
    n_lags: int = 41
    fixed_truth: bool = False
    fit_config: FitConfig = field(
        default_factory=lambda: FitConfig(n_starts=2, x_tol=1e-6, f_tol=1e-8, allow_small_alpha=True)
    )
    lhs_candidates: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.n_reps < 1:
            raise DomainError("n_reps must be at least 1")
        if self.design not in ("maximin_lhs", "grid"):
            raise DomainError(f"unknown design {self.design!r}")
        for c in self.candidates:
            if c not in ("matern", "ch", "gc"):
                raise DomainError(f"unknown candidate family {c!r}")
        family_name(self.truth)


CASE_TRUTHS = {
    1: ("matern", {"nu": 0.5}),
    2: ("ch", {"nu": 2.5, "alpha": 0.5}),
    3: ("gc", {"delta": 1.0, "lam": 1.0}),
}


def case_study_spec(case, effective_range=400.0, **overrides):
    """Standard case: 1 Matérn (nu=1/2), 2 CH (nu=5/2, alpha=1/2), 3 GC (delta=lambda=1).

    The truth has unit variance and its scale set so that the correlation is
    0.05 at ``effective_range``.
    """
    if case not in CASE_TRUTHS:
        raise DomainError(f"case must be one of {sorted(CASE_TRUTHS)}")
    fam, shape = CASE_TRUTHS[case]
    if fam == "matern":
        base = MaternParams(phi=1.0, **shape)
    elif fam == "ch":
        base = CHParams(beta=1.0, **shape)
    else:
        base = GCParams(phi=1.0, **shape)
    truth = with_effective_range(base, effective_range)
    return StudySpec(case_id=f"case{case}", truth=truth, effective_range=effective_range, **overrides)


def candidate_template(family, truth, effective_range):
    """Starting model of one candidate family, calibrated to the effective range."""
    nu = smoothness_of(truth)
    if family == "matern":
        base = MaternParams(nu=nu, phi=1.0)
    elif family == "ch":
        base = CHParams(nu=nu, alpha=1.0, beta=1.0)
    else:
        base = GCParams(delta=gc_delta_for(nu), lam=1.0, phi=1.0)
    return GPModel(with_effective_range(base, effective_range))


@dataclass
class PredictionStudyResult:
    """Per-replicate metric rows, fitted correlation curves and aggregates."""

    spec: StudySpec
    metric_header: list
    metric_rows: list
    curve_header: list
    curve_rows: list
    summary_header: list
    summary_rows: list

    def metric(self, model, name="rmspe"):
        """Per-replicate values of ``name`` for ``model`` (nan where it failed)."""
        col = self.metric_header.index(name)
        vals = {}
        for row in self.metric_rows:
            if row[2] == model:
                vals[row[1]] = row[col] if row[3] == "ok" else math.nan
        return np.array([vals.get(r, math.nan) for r in range(self.spec.n_reps)])


METRIC_HEADER = [
    "case_id", "rep", "model", "status", "rmspe", "cvg95", "alci95",
    "loglik", "sigma2", "scale", "tail", "n_evals", "converged",
]
CURVE_HEADER = ["case_id", "rep", "model", "lag", "correlation"]
SUMMARY_HEADER = [
    "case_id", "model", "n_ok", "n_failed", "median_rmspe", "mean_rmspe",
    "median_cvg95", "mean_cvg95", "median_alci95", "mean_alci95",
]


def _scale_and_tail(kernel):
    if isinstance(kernel, CHParams):
        return kernel.beta, kernel.alpha
    if isinstance(kernel, GCParams):
        return kernel.phi, kernel.lam
    return kernel.phi, None


def _study_design(spec):
    if spec.design == "grid":
        side = int(round(spec.n_train ** (1.0 / len(spec.domain))))
        if side ** len(spec.domain) != spec.n_train:
            raise DomainError("grid designs need n_train to be a perfect power of the dimension")
        return regular_grid(spec.domain, [side] * len(spec.domain))
    return maximin_lhs(spec.n_train, spec.domain, stream(spec.seed, 0, 0).integers(2**63), spec.lhs_candidates)


def run_prediction_study(spec, output_dir=None):
    """Simulate, fit every candidate, krige at the targets and score.

    Each replicate draws training data and the latent values at the targets
    jointly from the truth.  RMSPE compares kriging means with those latent
    values; CVG is the fraction of targets inside the 95% intervals; ALCI is
    the mean interval length.  Failed fits are recorded with status
    ``failed`` and left out of the aggregates.
    """
    t0 = time.perf_counter()
    train = _study_design(spec)
    targets = regular_grid(spec.domain, spec.target_counts)
    joint = train.stack(targets)
    lower = factorize(kernel_matrix(spec.truth, joint)).lower
    n = train.n
    lag_max = 0.5 * float(np.hypot(*[hi - lo for lo, hi in spec.domain])) if len(spec.domain) > 1 else (
        spec.domain[0][1] - spec.domain[0][0]
    )
    lags = np.linspace(0.0, lag_max, spec.n_lags)
    templates = {c: candidate_template(c, spec.truth, spec.effective_range) for c in spec.candidates}

    def replicate(r):
        rng = stream(spec.seed, 1, r)
        y = lower @ rng.standard_normal(joint.n)
        data = Dataset(train, y[:n])
        truth_t = y[n:]
        metric_rows, curve_rows = [], []
        for name in spec.candidates:
            try:
                if spec.fixed_truth:
                    model = GPModel(spec.truth)
                    loglik, n_evals, conv = math.nan, 0, True
                else:
                    cfg = replace(spec.fit_config, seed=int(stream(spec.seed, 2, r).integers(2**31)))
                    res = fit(templates[name], data, cfg)
                    model, loglik, n_evals, conv = res.model, res.loglik, res.n_evals, res.converged
                pred = krige(model, data, targets)
            except FAILURES:
                metric_rows.append([spec.case_id, r, name, "failed"] + [None] * 9)
                continue
            err = pred.mean - truth_t
            rmspe = math.sqrt(float(np.mean(err**2)))
            cvg = float(np.mean((truth_t >= pred.lower95) & (truth_t <= pred.upper95)))
            alci = float(np.mean(pred.upper95 - pred.lower95))
            scale, tail = _scale_and_tail(model.kernel)
            metric_rows.append([
                spec.case_id, r, name, "ok", rmspe, cvg, alci, loglik,
                model.kernel.sigma2, scale, tail, n_evals, conv,
            ])
            curve = correlation(model.kernel, lags)
            curve_rows.extend([spec.case_id, r, name, h, c] for h, c in zip(lags, curve))
        return metric_rows, curve_rows

    per_rep = _map(replicate, range(spec.n_reps), spec.threads)
    metric_rows = [row for rows, _ in per_rep for row in rows]
    curve_rows = [row for _, rows in per_rep for row in rows]
    summary_rows = summarize_metrics(spec.case_id, spec.candidates, metric_rows)
    result = PredictionStudyResult(
        spec, METRIC_HEADER, metric_rows, CURVE_HEADER, curve_rows, SUMMARY_HEADER, summary_rows
    )
    if output_dir is not None:
        _write_prediction_outputs(result, output_dir, time.perf_counter() - t0)
    return result


def summarize_metrics(case_id, models, metric_rows):
    """Aggregate rows, recomputable from the per-replicate table alone."""
    out = []
    for name in models:
        ok = [r for r in metric_rows if r[2] == name and r[3] == "ok"]
        failed = sum(1 for r in metric_rows if r[2] == name and r[3] != "ok")
        row = [case_id, name, len(ok), failed]
        for col in (4, 5, 6):
            vals = np.array([r[col] for r in ok], dtype=float)
            row += [float(np.median(vals)), float(np.mean(vals))] if vals.size else [None, None]
        out.append(row)
    return out


def paired_ratio_median(result, numerator, denominator, metric="rmspe"):
    """Median over replicates of ``metric(numerator) / metric(denominator)``.

    Replicates where either model failed are skipped.
    """
    a = result.metric(numerator, metric)
    b = result.metric(denominator, metric)
    ok = np.isfinite(a) & np.isfinite(b)
    if not np.any(ok):
        return math.nan
    return float(np.median(a[ok] / b[ok]))


def _spec_echo(spec):
    d = asdict(spec)
    d["truth"] = kernel_to_dict(spec.truth)
    d.pop("threads", None)
    return d


def _write_prediction_outputs(result, output_dir, wall_time):
    os.makedirs(output_dir, exist_ok=True)
    stem = result.spec.case_id
    files = {
        "metrics": f"{stem}_metrics.csv",
        "curves": f"{stem}_curves.csv",
        "summary": f"{stem}_summary.csv",
    }
    write_table(os.path.join(output_dir, files["metrics"]), result.metric_header, result.metric_rows)
    write_table(os.path.join(output_dir, files["curves"]), result.curve_header, result.curve_rows)
    write_table(os.path.join(output_dir, files["summary"]), result.summary_header, result.summary_rows)
    write_json(
        os.path.join(output_dir, f"{stem}_manifest.json"),
        {"study": "prediction", "spec": _spec_echo(result.spec), "files": files,
         "environment": _environment()},
    )
    write_json(os.path.join(output_dir, f"{stem}_runtime.json"), {"wall_time_s": wall_time})


# ---------------------------------------------------------------------------
# sampling distribution of the microergodic estimator

ASYMPTOTIC_MODES = ("true", "beta_half", "beta_double", "beta_hat", "both_hat")
ASYMPTOTIC_REP_HEADER = ["n", "mode", "rep", "status", "c_hat", "xi", "covered"]
ASYMPTOTIC_SUMMARY_HEADER = [
    "n", "mode", "n_ok", "n_failed", "p05", "p25", "p50", "p75", "p95", "cvg", "bias", "rmse",
]


@dataclass
class AsymptoticStudyResult:
    truth: CHParams
    c0: float
    rep_header: list
    rep_rows: list
    summary_header: list
    summary_rows: list

    def summary(self, n, mode):
        """Summary row for ``(n, mode)`` as a dict."""
        for row in self.summary_rows:
            if row[0] == n and row[1] == mode:
                return dict(zip(self.summary_header, row))
        raise KeyError((n, mode))

    def xi(self, n, mode):
        return np.array([r[5] for r in self.rep_rows if r[0] == n and r[1] == mode and r[3] == "ok"])


def _grid_offset_table(truth, side):
    """Truth correlation at every integer offset of a unit-square grid."""
    spacing = 1.0 / (side - 1)
    di, dj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    h = spacing * np.hypot(di, dj)
    uniq, inv = np.unique(h, return_inverse=True)
    return np.asarray(correlation(truth, uniq))[inv.ravel()].reshape(h.shape)


def run_asymptotic_study(
    truth,
    theta_modes=("true",),
    n_list=(200, 400),
    n_reps=200,
    seed=7,
    grid_side=50,
    fit_config=None,
    threads=1,
    output_dir=None,
):
    """Sampling distribution of ``c_hat_n(theta)`` under a CH truth.

    For every sample size and replicate, ``n`` sites are drawn without
    replacement from a ``grid_side x grid_side`` grid on the unit square and a
    zero-mean field is simulated there.  Each mode then gives one estimate:

    ``true``        theta = (alpha0, beta0)
    ``beta_half``   theta = (alpha0, sqrt(0.5) beta0)
    ``beta_double`` theta = (alpha0, sqrt(2) beta0)
    ``beta_hat``    alpha fixed at alpha0, beta by maximum likelihood
    ``both_hat``    alpha and beta by maximum likelihood

    and ``xi = sqrt(n) (c_hat - c0) / (sqrt(2) c0)``.
    """
    for m in theta_modes:
        if m not in ASYMPTOTIC_MODES:
            raise DomainError(f"unknown mode {m!r}; expected one of {ASYMPTOTIC_MODES}")
    if not isinstance(truth, CHParams):
        raise DomainError("the asymptotic study needs a CH truth")
    t0 = time.perf_counter()
    c0 = microergodic(truth)
    table = _grid_offset_table(truth, grid_side)
    grid = regular_grid([(0.0, 1.0), (0.0, 1.0)], [grid_side, grid_side])
    base_cfg = fit_config or FitConfig(n_starts=2, allow_small_alpha=True, x_tol=1e-6, f_tol=1e-9)
    sd = math.sqrt(truth.sigma2)

    def replicate(item):
        n, r = item
        rng = stream(seed, n, r)
        idx = np.sort(rng.choice(grid.coords.shape[0], size=n, replace=False))
        row, col = np.divmod(idx, grid_side)
        corr = table[np.abs(row[:, None] - row[None, :]), np.abs(col[:, None] - col[None, :])]
        z = sd * (factorize(corr).lower @ rng.standard_normal(n))
        data = Dataset(grid.subset(idx), z)
        lags = PairLags(data.locs)
        out = []
        for mode in theta_modes:
            try:
                c_hat = _mode_estimate(mode, truth, data, lags, base_cfg, seed, n, r)
            except FAILURES:
                out.append([n, mode, r, "failed", None, None, None])
                continue
            half = 1.959963984540054 * math.sqrt(2.0 / n) * c_hat
            xi = math.sqrt(n) * (c_hat - c0) / (math.sqrt(2.0) * c0)
            out.append([n, mode, r, "ok", c_hat, xi, bool(abs(c_hat - c0) <= half)])
        return out

    items = [(n, r) for n in n_list for r in range(n_reps)]
    rep_rows = [row for rows in _map(replicate, items, threads) for row in rows]
    summary_rows = summarize_asymptotic(rep_rows, n_list, theta_modes, c0)
    result = AsymptoticStudyResult(
        truth, c0, ASYMPTOTIC_REP_HEADER, rep_rows, ASYMPTOTIC_SUMMARY_HEADER, summary_rows
    )
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        write_table(os.path.join(output_dir, "asymptotic_reps.csv"), ASYMPTOTIC_REP_HEADER, rep_rows)
        write_table(os.path.join(output_dir, "asymptotic_summary.csv"), ASYMPTOTIC_SUMMARY_HEADER, summary_rows)
        write_json(
            os.path.join(output_dir, "asymptotic_manifest.json"),
            {
                "study": "asymptotic", "truth": kernel_to_dict(truth), "c0": c0,
                "modes": list(theta_modes), "n_list": list(n_list), "n_reps": n_reps,
                "seed": seed, "grid_side": grid_side, "fit_config": asdict(base_cfg),
                "environment": _environment(),
            },
        )
        write_json(os.path.join(output_dir, "asymptotic_runtime.json"),
                   {"wall_time_s": time.perf_counter() - t0})
    return result


def _mode_estimate(mode, truth, data, lags, cfg, seed, n, r):
    if mode in ("true", "beta_half", "beta_double"):
        factor = {"true": 1.0, "beta_half": math.sqrt(0.5), "beta_double": math.sqrt(2.0)}[mode]
        theta = replace(truth, beta=truth.beta * factor)
        return microergodic_mle(theta, data, lags=lags)[0]
    fixed = {"alpha": truth.alpha} if mode == "beta_hat" else {}
    mode_cfg = replace(cfg, fixed=fixed, seed=int(stream(seed, n, r, 1).integers(2**31)))
    res = fit(GPModel(truth), data, mode_cfg)
    return res.microergodic_hat


def summarize_asymptotic(rep_rows, n_list, modes, c0):
    out = []
    for n in n_list:
        for mode in modes:
            rows = [r for r in rep_rows if r[0] == n and r[1] == mode]
            ok = [r for r in rows if r[3] == "ok"]
            if not ok:
                out.append([n, mode, 0, len(rows)] + [None] * 8)
                continue
            xi = np.array([r[5] for r in ok])
            c = np.array([r[4] for r in ok])
            pct = np.percentile(xi, [5, 25, 50, 75, 95])
            cvg = float(np.mean([r[6] for r in ok]))
            bias = float(np.mean(c - c0))
            rmse = float(np.sqrt(np.mean((c - c0) ** 2)))
            out.append([n, mode, len(ok), len(rows) - len(ok)] + [float(p) for p in pct] + [cvg, bias, rmse])
    return out


# ---------------------------------------------------------------------------
# prediction efficiency under an equivalent CH model

EFFICIENCY_HEADER = ["n", "rep", "mspe_truth", "mspe_ch", "ratio"]


@dataclass
class EfficiencyStudyResult:
    truth: MaternParams
    ch: CHParams
    rep_rows: list
    mean_ratio: dict


def true_mspe(weights, k_true, r_true, sigma2_true):
    """MSPE under the truth of the linear predictor ``weights' z``."""
    return sigma2_true - 2.0 * weights @ r_true + weights @ k_true @ weights


def run_efficiency_study(truth, ch, n_list=(50, 100, 200, 400), n_reps=50, seed=11, threads=1):
    """Ratio of the true MSPE of CH-based kriging to that of the optimal predictor.

    Each replicate draws ``n`` uniform sites on the unit square and one
    uniform target.  Both predictors are simple kriging (known zero mean);
    their mean squared errors are computed exactly under ``truth``, so the
    ratio is at least 1.  ``mean_ratio[n]`` averages over replicates.
    """
    def replicate(item):
        n, r = item
        rng = stream(seed, n, r)
        pts = Locations(rng.uniform(0.0, 1.0, size=(n, 2)))
        target = Locations(rng.uniform(0.0, 1.0, size=(1, 2)))
        k_true = kernel_matrix(truth, pts)
        r_true = cross_cov(truth, pts, target)[:, 0]
        w_opt = factorize(k_true).solve(r_true)
        k_ch = kernel_matrix(ch, pts)
        r_ch = cross_cov(ch, pts, target)[:, 0]
        w_ch = factorize(k_ch).solve(r_ch)
        m_opt = true_mspe(w_opt, k_true, r_true, truth.sigma2)
        m_ch = true_mspe(w_ch, k_true, r_true, truth.sigma2)
        return [n, r, m_opt, m_ch, m_ch / m_opt]

    items = [(n, r) for n in n_list for r in range(n_reps)]
    rows = _map(replicate, items, threads)
    mean_ratio = {n: float(np.mean([row[4] for row in rows if row[0] == n])) for n in n_list}
    return EfficiencyStudyResult(truth, ch, rows, mean_ratio)


# ---------------------------------------------------------------------------
# timing benchmark and 1-D realizations


def run_timing_bench(n_evals=100_000, seed=0, n_param_sets=5, repeats=3):
    """Mean wall time per evaluation of ``bessel_k`` and ``hyperg_u``.

    Each parameter set draws ``nu`` in [0.5, 2.5], ``alpha`` in [0.5, 5] and
    ``n_evals`` lags in (0, 3]; the Matérn argument ``sqrt(2 nu) h`` and the CH
    argument ``nu h^2`` (unit scales) are timed in one vectorized call each,
    after a warm-up call, keeping the fastest of ``repeats`` runs.

    Returns
    -------
    dict
        ``bessel_k_ns`` and ``hyperg_u_ns`` (mean per evaluation), their
        ``ratio`` and the per-set timings.
    """
    if n_evals < 1:
        raise DomainError("n_evals must be positive")
    rng = stream(seed, 0)
    per_set = []
    for _ in range(n_param_sets):
        nu = float(rng.uniform(0.5, 2.5))
        alpha = float(rng.uniform(0.5, 5.0))
        h = rng.uniform(0.0, 3.0, size=n_evals)
        h = np.where(h == 0, 3.0, h)
        xb = math.sqrt(2.0 * nu) * h
        xu = nu * h * h
        bessel_k(nu, xb[:16])
        hyperg_u(alpha, 1.0 - nu, xu[:16])
        tb = min(_timed(lambda: bessel_k(nu, xb)) for _ in range(repeats))
        tu = min(_timed(lambda: hyperg_u(alpha, 1.0 - nu, xu)) for _ in range(repeats))
        per_set.append({"nu": nu, "alpha": alpha, "bessel_k_ns": tb / n_evals, "hyperg_u_ns": tu / n_evals})
    b = float(np.mean([p["bessel_k_ns"] for p in per_set]))
    u = float(np.mean([p["hyperg_u_ns"] for p in per_set]))
    return {"n_evals": n_evals, "bessel_k_ns": b, "hyperg_u_ns": u, "ratio": u / b, "sets": per_set}


def _timed(func):
    start = time.perf_counter_ns()
    func()
    return time.perf_counter_ns() - start


def export_realizations_1d(kernels, n_points=2000, seed=0, length=1.0, path=None):
    """Coupled realizations of several kernels on one regular 1-D grid.

    Every kernel transforms the same standard-normal vector, so differences
    between columns reflect only the kernels.

    Parameters
    ----------
    kernels : sequence of (label, kernel)
    n_points : int
    seed : int
    length : float
        The grid is ``n_points`` equally spaced points on ``[0, length]``.
    path : str, optional
        Write a CSV with one column per kernel.

    Returns
    -------
    grid : ndarray, shape (n_points,)
    values : ndarray, shape (n_points, len(kernels))
    """
    if n_points < 2:
        raise DomainError("n_points must be at least 2")
    grid = np.linspace(0.0, length, n_points)
    locs = Locations(grid[:, None])
    w = stream(seed, 0).standard_normal(n_points)
    cols = []
    for _, kernel in kernels:
        cols.append(factorize(kernel_matrix(kernel, locs)).lower @ w)
    values = np.column_stack(cols) if cols else np.empty((n_points, 0))
    if path is not None:
        write_table(path, [label for label, _ in kernels], values.tolist())
    return grid, values
