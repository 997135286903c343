import json
import math
import os

import numpy as np
import pytest

from chgp.errors import DomainError
from chgp.estimate import FitConfig
from chgp.experiments import (
    case_study_spec,
    export_realizations_1d,
    paired_ratio_median,
    run_asymptotic_study,
    run_efficiency_study,
    run_prediction_study,
    run_timing_bench,
)
from chgp.kernels import CHParams, MaternParams, correlation, equivalent_ch, microergodic


def _tiny(case, **kw):
    base = dict(n_train=30, n_reps=2, target_counts=(3, 3), n_lags=5, lhs_candidates=3,
                fit_config=FitConfig(n_starts=1, max_iters=200, x_tol=1e-4, f_tol=1e-6, allow_small_alpha=True))
    base.update(kw)
    return case_study_spec(case, **base)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_case_truths_hit_effective_range(case):
    spec = case_study_spec(case)
    assert correlation(spec.truth, spec.effective_range) == pytest.approx(0.05, rel=1e-9)
    with pytest.raises(DomainError):
        case_study_spec(4)


def test_prediction_study_outputs(tmp_path):
    res = run_prediction_study(_tiny(1), output_dir=str(tmp_path))
    assert len(res.metric_rows) == 2 * 3
    assert all(row[3] == "ok" for row in res.metric_rows)
    for row in res.metric_rows:
        assert row[4] > 0 and 0 <= row[5] <= 1 and row[6] > 0
    names = sorted(os.listdir(tmp_path))
    assert names == ["case1_curves.csv", "case1_manifest.json", "case1_metrics.csv", "case1_runtime.json", "case1_summary.csv"]
    manifest = json.loads((tmp_path / "case1_manifest.json").read_text())
    assert manifest["spec"]["truth"]["family"] == "matern"
    r = paired_ratio_median(res, "ch", "matern")
    assert r == pytest.approx(np.median(res.metric("ch") / res.metric("matern")))


def test_prediction_study_fixed_truth_all_models_equal():
    res = run_prediction_study(_tiny(2, fixed_truth=True))
    assert np.array_equal(res.metric("matern"), res.metric("ch"))


def test_prediction_study_thread_invariance():
    a = run_prediction_study(_tiny(3, threads=1))
    b = run_prediction_study(_tiny(3, threads=2))
    assert a.metric_rows == b.metric_rows and a.curve_rows == b.curve_rows


def test_asymptotic_study_small():
    truth = CHParams(0.5, 2.0, 0.3)
    res = run_asymptotic_study(truth, ("true", "beta_half", "beta_double", "beta_hat"), n_list=(40,), n_reps=3, grid_side=12,
                               fit_config=FitConfig(n_starts=1, x_tol=1e-4, f_tol=1e-6))
    assert res.c0 == pytest.approx(microergodic(truth))
    xi = {m: res.xi(40, m) for m in ("true", "beta_half", "beta_double")}
    # a smaller beta inflates c_hat on every dataset
    assert np.all(xi["beta_half"] > xi["true"]) and np.all(xi["beta_double"] < xi["true"])
    row = res.summary(40, "true")
    assert row["n_ok"] == 3 and 0 <= row["cvg"] <= 1
    with pytest.raises(DomainError):
        run_asymptotic_study(truth, ("nope",))
    with pytest.raises(DomainError):
        run_asymptotic_study(MaternParams(0.5, 1.0))


def test_efficiency_study_ratio_at_least_one():
    m = MaternParams(0.5, 0.2)
    ch = equivalent_ch(m, 2.0, 0.5)
    res = run_efficiency_study(m, ch, n_list=(20, 40), n_reps=4)
    ratios = np.array([row[4] for row in res.rep_rows])
    assert np.all(ratios >= 1 - 1e-10)
    assert set(res.mean_ratio) == {20, 40}


def test_efficiency_identical_models_ratio_one():
    ch = CHParams(0.5, 2.0, 0.3)
    res = run_efficiency_study(ch, ch, n_list=(15,), n_reps=2)
    np.testing.assert_allclose([r[4] for r in res.rep_rows], 1.0, rtol=1e-10)


def test_timing_bench_keys():
    out = run_timing_bench(n_evals=1000, n_param_sets=2, repeats=1)
    assert out["bessel_k_ns"] > 0 and out["hyperg_u_ns"] > 0
    assert out["ratio"] == pytest.approx(out["hyperg_u_ns"] / out["bessel_k_ns"])
    with pytest.raises(DomainError):
        run_timing_bench(n_evals=0)


def test_realizations_share_noise(tmp_path):
    k = MaternParams(0.5, 0.1)
    path = tmp_path / "r.csv"
    grid, vals = export_realizations_1d([("a", k), ("b", k), ("c", CHParams(0.5, 2.0, 0.1))], n_points=50, seed=2, path=str(path))
    assert np.array_equal(vals[:, 0], vals[:, 1])
    assert vals.shape == (50, 3) and grid[-1] == 1.0
    assert path.read_text().splitlines()[0] == "a,b,c"
    assert not math.isclose(vals[10, 0], vals[10, 2])
