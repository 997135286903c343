import json
import os
import subprocess
import sys

import pytest

from chgp.cli import main

from conftest import DATA_DIR


def _data(name):
    return os.path.join(DATA_DIR, name)


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_simulate_reproduces_toy_data(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["--seed", "3", "simulate", _data("toy_sim.ini"), "-o", str(out)]) == 0
    assert _read(out) == _read(_data("toy_data.csv"))
    manifest = json.loads((tmp_path / "sim.csv.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["model"]["kernel"]["family"] == "ch"


def test_fit_and_predict_match_golden_files(tmp_path):
    fit_out = tmp_path / "fit.json"
    pred_out = tmp_path / "pred.csv"
    assert main(["--seed", "5", "fit", _data("toy_data.csv"), _data("toy_fit.ini"), "-o", str(fit_out)]) == 0
    assert _read(fit_out) == _read(_data("golden_fit.json"))
    assert main(["predict", str(fit_out), _data("toy_targets.csv"), "-o", str(pred_out)]) == 0
    assert _read(pred_out) == _read(_data("golden_predict.csv"))


def test_predict_to_stdout(capsys):
    assert main(["predict", _data("golden_fit.json"), _data("toy_targets.csv")]) == 0
    assert capsys.readouterr().out.encode() == _read(_data("golden_predict.csv"))


def _ini(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize(
    "text, message",
    [
        ("[kernel]\nfamily = ch\nnu = 0.5\nalpha = 1\nbeta = 1\ncolour = 3\n", "unknown key"),
        ("[kernels]\nfamily = ch\n", "unknown section"),
        ("[kernel]\nfamily = spline\n", "family must be"),
        ("[kernel]\nfamily = matern\nnu = 0.5\n", "missing key 'phi'"),
        ("[kernel]\nfamily = matern\nnu = 0.5\nphi = x\n", "not a valid float"),
        ("[kernel]\nfamily = matern\nnu = 0.5\nphi = 1\nalpha = 2\n", "do not apply"),
        ("[kernel]\nfamily = matern\nnu = -0.5\nphi = 1\n", "nu"),
    ],
)
def test_config_errors_exit_1(tmp_path, capsys, text, message):
    assert main(["spectral", _ini(tmp_path, text)]) == 1
    assert message in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    assert main(["fit", "missing.csv", _data("toy_fit.ini")]) == 1
    assert "not found" in capsys.readouterr().err


def test_bad_csv_exits_1(tmp_path, capsys):
    bad = _ini(tmp_path, "x1,x2,z\n0,0,1\n0,1\n", "bad.csv")
    assert main(["fit", bad, _data("toy_fit.ini")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_spectral_precondition_exits_2(tmp_path, capsys):
    cfg = _ini(tmp_path, "[kernel]\nfamily = ch\nnu = 0.5\nalpha = 0.8\nbeta = 0.3\n")
    assert main(["spectral", cfg, "--d", "2"]) == 2
    assert "alpha > d/2" in capsys.readouterr().err


def test_spectral_table(tmp_path, capsys):
    cfg = _ini(tmp_path, "[kernel]\nfamily = matern\nnu = 0.5\nphi = 1\n")
    assert main(["spectral", cfg, "--n-omega", "3", "--omega-max", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "omega,density" and len(lines) == 4


def test_fit_fixed_and_chordal(tmp_path):
    data = _ini(tmp_path, "lon,lat,z\n0,0,1.0\n10,5,0.5\n20,-5,-0.2\n5,15,0.1\n-10,8,0.7\n", "s.csv")
    cfg = _ini(tmp_path, "[kernel]\nfamily = ch\nnu = 0.5\nalpha = 2.0\nbeta = 500\n[fit]\nfixed = alpha\nn_starts = 1\n")
    out = tmp_path / "f.json"
    assert main(["fit", data, cfg, "--metric", "chordal", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["model"]["kernel"]["alpha"] == 2.0
    assert doc["data"]["metric"] == "chordal"
    assert set(doc["free_params"]) == {"beta"}


def test_experiment_is_byte_reproducible(tmp_path):
    cfg = _ini(
        tmp_path,
        "[study]\nkind = prediction\ncase = 3\nn_train = 25\nn_reps = 2\nn_targets = 3\nside = 1000\nn_starts = 1\n",
    )
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["--seed", "4", "experiment", cfg, "-o", str(d)]) == 0
        outs.append({n: _read(d / n) for n in sorted(os.listdir(d)) if "runtime" not in n})
    assert outs[0] == outs[1] and len(outs[0]) == 4


def test_bench_runs(capsys):
    assert main(["bench", "--n-evals", "500"]) == 0
    assert "ratio" in json.loads(capsys.readouterr().out)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chgp", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("chgp ")
