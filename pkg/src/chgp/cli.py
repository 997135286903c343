"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``predict``, ``spectral``, ``experiment``
and ``bench``.  Configuration files are INI files; unknown sections or keys
are rejected so that typos cannot pass silently.

Exit status: 0 on success, 1 for usage, configuration and input-format
errors, 2 for numerical failures.
"""

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import __version__
from .design import EARTH_RADIUS_KM, Locations, maximin_lhs, regular_grid
from .errors import (
    BracketError,
    ConvergenceError,
    DecompositionError,
    DomainError,
    OptimizationError,
)
from .estimate import FitConfig, fit
from .experiments import (
    ASYMPTOTIC_MODES,
    case_study_spec,
    export_realizations_1d,
    run_asymptotic_study,
    run_efficiency_study,
    run_prediction_study,
    run_timing_bench,
)
from .gp import Dataset, GPModel, krige
from .io import (
    CSVFormatError,
    dumps_json,
    kernel_from_dict,
    kernel_to_dict,
    model_from_dict,
    model_to_dict,
    read_dataset,
    read_locations,
    write_json,
    write_table,
)
from .kernels import (
    CHParams,
    GCParams,
    MaternParams,
    ch_spectral,
    effective_range,
    equivalent_ch,
    matern_spectral,
)
from .simulate import sample_gp

__all__ = ["main", "build_parser"]

THREADS_ENV = "CHGP_THREADS"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (ConvergenceError, DecompositionError, OptimizationError, BracketError, DomainError)


class UsageError(Exception):
    """Bad invocation, configuration or input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration

KERNEL_KEYS = {
    "matern": ("nu", "phi", "sigma2"),
    "ch": ("nu", "alpha", "beta", "sigma2"),
    "gc": ("delta", "lam", "phi", "sigma2"),
}
SCHEMA = {
    "kernel": {"family", "nu", "phi", "alpha", "beta", "delta", "lam", "sigma2"},
    "model": {"mean_b", "nugget_tau2", "estimate_mean", "mean_correction"},
    "locations": {"file", "metric", "radius", "grid_bounds", "grid_counts", "lhs_n", "lhs_bounds", "lhs_candidates"},
    "simulate": {"n_reps"},
    "fit": {
        "objective", "n_starts", "max_iters", "x_tol", "f_tol", "estimate_nugget",
        "allow_small_alpha", "fixed", "bounds_alpha", "bounds_beta", "bounds_phi",
        "bounds_lam", "bounds_eta",
    },
    "study": {
        "kind", "case", "effective_range", "n_train", "n_reps", "design", "side", "n_targets",
        "n_starts", "fixed_truth", "candidates", "nu", "alpha", "beta", "sigma2", "modes",
        "n_list", "grid_side", "phi", "n_points", "length", "kernels",
    },
}


def read_config(path, allowed_sections):
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    for section in cp.sections():
        if section not in allowed_sections:
            raise UsageError(f"{path}: unknown section [{section}]")
        unknown = set(cp[section]) - SCHEMA[section]
        if unknown:
            raise UsageError(f"{path}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return cp


def _get(cp, section, key, conv=str, default=None, required=False):
    if not cp.has_section(section) or key not in cp[section]:
        if required:
            raise UsageError(f"missing key {key!r} in [{section}]")
        return default
    raw = cp[section][key].strip()
    try:
        if conv is bool:
            return cp[section].getboolean(key)
        return conv(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _pairs(text):
    out = []
    for part in text.split(";"):
        vals = _floats(part)
        if len(vals) != 2:
            raise ValueError(text)
        out.append(tuple(vals))
    return out


def kernel_from_config(cp):
    family = _get(cp, "kernel", "family", required=True).lower()
    if family not in KERNEL_KEYS:
        raise UsageError(f"[kernel] family must be one of {sorted(KERNEL_KEYS)}, got {family!r}")
    present = set(cp["kernel"]) - {"family"}
    extra = present - set(KERNEL_KEYS[family])
    if extra:
        raise UsageError(f"[kernel] key(s) {', '.join(sorted(extra))} do not apply to family {family}")
    vals = {k: _get(cp, "kernel", k, float, required=(k != "sigma2")) for k in KERNEL_KEYS[family]}
    if vals["sigma2"] is None:
        vals["sigma2"] = 1.0
    cls = {"matern": MaternParams, "ch": CHParams, "gc": GCParams}[family]
    try:
        return cls(**vals)
    except DomainError as exc:
        raise UsageError(f"[kernel] {exc}") from None


def model_from_config(cp):
    kernel = kernel_from_config(cp)
    try:
        return GPModel(
            kernel,
            mean_b=_get(cp, "model", "mean_b", float, 0.0),
            nugget_tau2=_get(cp, "model", "nugget_tau2", float, 0.0),
            estimate_mean=_get(cp, "model", "estimate_mean", bool, False),
            mean_correction=_get(cp, "model", "mean_correction", bool, True),
        )
    except DomainError as exc:
        raise UsageError(f"[model] {exc}") from None


def locations_from_config(cp, seed):
    metric = _get(cp, "locations", "metric", str, "euclidean")
    radius = _get(cp, "locations", "radius", float, EARTH_RADIUS_KM)
    path = _get(cp, "locations", "file")
    try:
        if path:
            return read_locations(path, metric, radius)
        if _get(cp, "locations", "grid_counts"):
            bounds = _get(cp, "locations", "grid_bounds", _pairs, required=True)
            return regular_grid(bounds, _get(cp, "locations", "grid_counts", _ints))
        if _get(cp, "locations", "lhs_n"):
            bounds = _get(cp, "locations", "lhs_bounds", _pairs, required=True)
            return maximin_lhs(
                _get(cp, "locations", "lhs_n", int), bounds, seed,
                _get(cp, "locations", "lhs_candidates", int, 100),
            )
    except DomainError as exc:
        raise UsageError(f"[locations] {exc}") from None
    raise UsageError("[locations] needs one of: file, grid_counts, lhs_n")


def fit_config_from(cp, seed):
    kw = {"seed": seed}
    for key, conv in (
        ("objective", str), ("n_starts", int), ("max_iters", int), ("x_tol", float),
        ("f_tol", float), ("estimate_nugget", bool), ("allow_small_alpha", bool),
    ):
        val = _get(cp, "fit", key, conv)
        if val is not None:
            kw[key] = val
    bounds = {}
    for name in ("alpha", "beta", "phi", "lam", "eta"):
        val = _get(cp, "fit", f"bounds_{name}", _floats)
        if val is not None:
            if len(val) != 2:
                raise UsageError(f"[fit] bounds_{name} needs two numbers")
            bounds[name] = tuple(val)
    kw["bounds"] = bounds
    fixed_names = [v.strip() for v in (_get(cp, "fit", "fixed", str, "") or "").split(",") if v.strip()]
    kw["fixed"] = fixed_names
    return kw


# ---------------------------------------------------------------------------
# subcommands


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def _coord_header(locs):
    if locs.metric == "euclidean":
        return [f"x{i + 1}" for i in range(locs.dim)]
    return ["lon", "lat"]


def cmd_simulate(args):
    cp = read_config(args.config, {"kernel", "model", "locations", "simulate"})
    model = model_from_config(cp)
    seed = args.seed if args.seed is not None else 0
    locs = locations_from_config(cp, seed)
    n_reps = _get(cp, "simulate", "n_reps", int, 1)
    if n_reps < 1:
        raise UsageError("[simulate] n_reps must be at least 1")
    draws = sample_gp(model, locs, n_reps, seed)
    cols = ["z"] if n_reps == 1 else [f"z_{r}" for r in range(n_reps)]
    rows = np.column_stack([locs.coords, draws.T]).tolist()
    write_table(args.out, _coord_header(locs) + cols, rows)
    write_json(args.out + ".manifest.json", {
        "command": "simulate", "seed": seed, "model": model_to_dict(model),
        "n": locs.n, "n_reps": n_reps, "metric": locs.metric, "version": __version__,
    })
    return EXIT_OK


def cmd_fit(args):
    cp = read_config(args.config, {"kernel", "model", "fit"})
    template = model_from_config(cp)
    seed = args.seed if args.seed is not None else 0
    data = _read_data(args.data, args.metric, args.radius)
    kw = fit_config_from(cp, seed)
    kw["fixed"] = {name: _fixed_value(template, name) for name in kw["fixed"]}
    try:
        cfg = FitConfig(**kw)
    except DomainError as exc:
        raise UsageError(f"[fit] {exc}") from None
    res = fit(template, data, cfg)
    out = {
        "command": "fit",
        "seed": seed,
        "version": __version__,
        "objective": res.objective,
        "loglik": res.loglik,
        "model": model_to_dict(res.model),
        "free_params": res.free_params,
        "microergodic_hat": res.microergodic_hat,
        "microergodic_ci95": list(res.microergodic_ci95) if res.microergodic_ci95 else None,
        "n_evals": res.n_evals,
        "converged": res.converged,
        "data": {
            "metric": data.locs.metric,
            "radius": data.locs.radius,
            "coords": data.locs.coords,
            "z": data.z,
        },
    }
    _emit_json(args.out, out)
    return EXIT_OK


def _fixed_value(template, name):
    if name == "eta":
        return template.nugget_ratio
    if not hasattr(template.kernel, name):
        raise UsageError(f"[fit] cannot fix {name!r} for this kernel family")
    return getattr(template.kernel, name)


def _read_data(path, metric, radius):
    if not os.path.exists(path):
        raise UsageError(f"data file not found: {path}")
    return read_dataset(path, metric, radius)


def cmd_predict(args):
    if not os.path.exists(args.fit):
        raise UsageError(f"fit file not found: {args.fit}")
    with open(args.fit) as fh:
        try:
            doc = json.load(fh)
            model = model_from_dict(doc["model"])
            d = doc["data"]
            locs = Locations(np.array(d["coords"], dtype=float), d["metric"], float(d["radius"]))
            data = Dataset(locs, np.array(d["z"], dtype=float))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{args.fit}: not a fit result ({exc})") from None
    if not os.path.exists(args.targets):
        raise UsageError(f"targets file not found: {args.targets}")
    targets = read_locations(args.targets, locs.metric, locs.radius)
    if targets.dim != locs.dim:
        raise UsageError(f"{args.targets}: targets have {targets.dim} coordinates, data have {locs.dim}")
    pred = krige(model, data, targets)
    rows = np.column_stack([targets.coords, pred.mean, pred.sd, pred.lower95, pred.upper95]).tolist()
    header = _coord_header(targets) + ["mean", "sd", "lo95", "hi95"]
    if args.out == "-":
        write_table(sys.stdout, header, rows)
    else:
        write_table(args.out, header, rows)
    return EXIT_OK


def cmd_spectral(args):
    cp = read_config(args.config, {"kernel"})
    kernel = kernel_from_config(cp)
    if args.n_omega < 1:
        raise UsageError("--n-omega must be positive")
    if args.log:
        if not 0 < args.omega_min < args.omega_max:
            raise UsageError("--log needs 0 < omega-min < omega-max")
        omega = np.geomspace(args.omega_min, args.omega_max, args.n_omega)
    else:
        omega = np.linspace(args.omega_min, args.omega_max, args.n_omega)
    if isinstance(kernel, CHParams):
        dens = ch_spectral(omega, kernel, args.d)
    elif isinstance(kernel, MaternParams):
        dens = matern_spectral(omega, kernel, args.d)
    else:
        raise UsageError("spectral densities are available for matern and ch kernels")
    rows = np.column_stack([omega, np.atleast_1d(dens)]).tolist()
    if args.out == "-":
        write_table(sys.stdout, ["omega", "density"], rows)
    else:
        write_table(args.out, ["omega", "density"], rows)
    return EXIT_OK


def cmd_experiment(args):
    cp = read_config(args.config, {"study", "fit"})
    kind = _get(cp, "study", "kind", required=True)
    seed = args.seed if args.seed is not None else 0
    threads = _threads(args)
    os.makedirs(args.out, exist_ok=True)
    g = lambda key, conv=str, default=None: _get(cp, "study", key, conv, default)  # noqa: E731
    if kind == "prediction":
        case = g("case", int, 1)
        overrides = {"seed": seed, "threads": threads}
        for key, conv in (("n_train", int), ("n_reps", int), ("design", str), ("fixed_truth", bool)):
            val = g(key, conv)
            if val is not None:
                overrides[key] = val
        side = g("side", float)
        if side is not None:
            overrides["domain"] = ((0.0, side), (0.0, side))
        n_targets = g("n_targets", int)
        if n_targets is not None:
            overrides["target_counts"] = (n_targets, n_targets)
        cands = g("candidates")
        if cands:
            overrides["candidates"] = tuple(c.strip() for c in cands.split(",") if c.strip())
        n_starts = g("n_starts", int)
        if n_starts is not None:
            overrides["fit_config"] = FitConfig(
                n_starts=n_starts, x_tol=1e-6, f_tol=1e-8, allow_small_alpha=True, seed=seed
            )
        spec = case_study_spec(case, g("effective_range", float, 400.0), **overrides)
        res = run_prediction_study(spec, output_dir=args.out)
        print(dumps_json({"summary_header": res.summary_header, "summary": res.summary_rows}), end="")
    elif kind == "asymptotic":
        nu, alpha = g("nu", float, 0.5), g("alpha", float, 2.0)
        beta = g("beta", float)
        if beta is None:
            beta = effective_range(CHParams(nu=nu, alpha=alpha, beta=1.0), g("effective_range", float, 0.6))
        truth = CHParams(nu=nu, alpha=alpha, beta=beta, sigma2=g("sigma2", float, 1.0))
        modes = tuple(m.strip() for m in g("modes", str, "true").split(","))
        for m in modes:
            if m not in ASYMPTOTIC_MODES:
                raise UsageError(f"[study] unknown mode {m!r}")
        res = run_asymptotic_study(
            truth, modes, tuple(_ints(g("n_list", str, "200,400"))), g("n_reps", int, 200),
            seed, g("grid_side", int, 50), threads=threads, output_dir=args.out,
        )
        print(dumps_json({"summary_header": res.summary_header, "summary": res.summary_rows}), end="")
    elif kind == "efficiency":
        truth = MaternParams(nu=g("nu", float, 0.5), phi=g("phi", float, 0.2), sigma2=g("sigma2", float, 1.0))
        ch = equivalent_ch(truth, g("alpha", float, 2.0), g("beta", float, 0.5))
        res = run_efficiency_study(
            truth, ch, tuple(_ints(g("n_list", str, "50,100,200,400"))), g("n_reps", int, 50), seed, threads
        )
        write_table(os.path.join(args.out, "efficiency_reps.csv"),
                    ["n", "rep", "mspe_truth", "mspe_ch", "ratio"], res.rep_rows)
        write_json(os.path.join(args.out, "efficiency_manifest.json"), {
            "study": "efficiency", "truth": kernel_to_dict(truth), "ch": kernel_to_dict(ch),
            "seed": seed, "mean_ratio": res.mean_ratio, "version": __version__,
        })
        print(dumps_json({str(k): v for k, v in res.mean_ratio.items()}), end="")
    elif kind == "realizations":
        specs = g("kernels", str)
        if not specs:
            raise UsageError("[study] realizations need kernels = label:json;...")
        kernels = []
        for part in specs.split(";"):
            label, _, body = part.partition(":")
            try:
                kernels.append((label.strip(), kernel_from_dict(json.loads(body))))
            except (ValueError, KeyError, TypeError) as exc:
                raise UsageError(f"[study] kernel {label.strip()!r}: {exc}") from None
        export_realizations_1d(
            kernels, g("n_points", int, 2000), seed, g("length", float, 1.0),
            path=os.path.join(args.out, "realizations.csv"),
        )
    else:
        raise UsageError(f"[study] kind must be prediction, asymptotic, efficiency or realizations, got {kind!r}")
    return EXIT_OK


def cmd_bench(args):
    res = run_timing_bench(args.n_evals, args.seed if args.seed is not None else 0)
    _emit_json(args.out, res)
    return EXIT_OK


def _emit_json(path, obj):
    if path == "-":
        sys.stdout.write(dumps_json(obj))
    else:
        write_json(path, obj)


def build_parser():
    p = _Parser(prog="chgp", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"chgp {__version__}")
    p.add_argument("--seed", type=int, default=None, help="seed for every random draw")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads for experiments (default: ${THREADS_ENV} or 1)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate realizations")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="fit covariance parameters to a data CSV")
    s.add_argument("data")
    s.add_argument("config")
    s.add_argument("-o", "--out", default="-")
    s.add_argument("--metric", choices=("euclidean", "chordal", "great_circle"), default="euclidean")
    s.add_argument("--radius", type=float, default=EARTH_RADIUS_KM)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="krige at target locations from a fit result")
    s.add_argument("fit")
    s.add_argument("targets")
    s.add_argument("-o", "--out", default="-")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("spectral", help="tabulate a spectral density")
    s.add_argument("config")
    s.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    s.add_argument("--omega-min", type=float, default=0.0)
    s.add_argument("--omega-max", type=float, default=10.0)
    s.add_argument("--n-omega", type=int, default=101)
    s.add_argument("--log", action="store_true", help="log-spaced frequencies")
    s.add_argument("-o", "--out", default="-")
    s.set_defaults(func=cmd_spectral)

    s = sub.add_parser("experiment", help="run a Monte Carlo study")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("bench", help="time bessel_k against hyperg_u")
    s.add_argument("--n-evals", type=int, default=100_000)
    s.add_argument("-o", "--out", default="-")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (simulate, fit, predict, spectral, experiment, bench)")
        return args.func(args)
    except (UsageError, CSVFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
