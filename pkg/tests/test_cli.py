import json

import numpy as np
import pytest

from mixreg.cli import EXIT_FAIL, EXIT_OK, EXIT_UNCERTIFIED, draw_columns, load_draws, main

CONFIG = """
[model]
a = 1.0
[mixing]
family = gamma
shape = {shape}
rate = {shape}
[data]
y = y.csv
x = x.csv
[chain]
algorithm = pxda
iterations = 400
burn_in = 100
thin = 2
seed = 5
[check]
grid_points = 200
grid_beta_ses = 40
grid_log_sigma_halfwidth = 12
[diagnose]
max_lag = 5
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.delenv("MIXREG_SEED", raising=False)
    (tmp_path / "x.csv").write_text("1.0\n1.5\n2.0\n2.5\n3.0\n3.5\n")
    (tmp_path / "y.csv").write_text("1.3\n2.9\n2.2\n5.6\n3.1\n4.4\n")
    for name, shape in (("ge", 5), ("na", 2.3), ("improper", 2)):
        (tmp_path / f"{name}.ini").write_text(CONFIG.format(shape=shape))
    return tmp_path


def run(workdir, *args):
    return main([args[0], "--config", str(workdir / args[1]), "--out", str(workdir / "out"), *args[2:]])


def test_check_writes_certificate(workdir):
    assert run(workdir, "check", "ge.ini") == EXIT_OK
    cert = json.loads((workdir / "out" / "certificate.json").read_text())
    assert cert["certificate"]["verdict"] == "GeometricallyErgodic"
    assert cert["propriety"]["proper"]
    assert "verdict: GeometricallyErgodic" in (workdir / "out" / "certificate.txt").read_text()


def test_check_not_applicable_exit_code(workdir):
    assert run(workdir, "check", "na.ini") == EXIT_UNCERTIFIED


def test_improper_posterior_is_an_input_failure(workdir):
    assert run(workdir, "check", "improper.ini") == EXIT_FAIL
    assert run(workdir, "sample", "improper.ini", "--force") == EXIT_FAIL


def test_sample_refuses_without_certificate(workdir):
    assert run(workdir, "sample", "na.ini") == EXIT_UNCERTIFIED
    assert not (workdir / "out" / "draws.csv").exists()
    assert run(workdir, "sample", "na.ini", "--force") == EXIT_OK


def test_sample_outputs(workdir):
    assert run(workdir, "sample", "ge.ini", "--algorithm", "da") == EXIT_OK
    its, names, vals = load_draws(workdir / "out" / "draws.csv")
    assert names == draw_columns(1, 1) == ["beta[0,0]", "sigma[0,0]"]
    np.testing.assert_array_equal(its, np.arange(102, 401, 2))
    assert vals.shape == (150, 2) and np.all(vals[:, 1] > 0)
    summary = json.loads((workdir / "out" / "summary.json").read_text())
    assert summary["algorithm"] == "da" and summary["seed"] == 5 and summary["retained"] == 150
    assert set(summary["columns"]["beta[0,0]"]) == {"mean", "sd", "mcse_mean", "mcse_sd"}


def test_seed_flag_overrides(workdir):
    run(workdir, "sample", "ge.ini", "--seed", "11")
    assert json.loads((workdir / "out" / "summary.json").read_text())["seed"] == 11


def test_draws_are_byte_identical_across_runs(workdir):
    run(workdir, "sample", "ge.ini")
    first = (workdir / "out" / "draws.csv").read_bytes()
    run(workdir, "sample", "ge.ini")
    assert (workdir / "out" / "draws.csv").read_bytes() == first


def test_column_order_multivariate():
    assert draw_columns(2, 2) == ["beta[0,0]", "beta[0,1]", "beta[1,0]", "beta[1,1]",
                                  "sigma[0,0]", "sigma[1,0]", "sigma[1,1]"]


def test_diagnose_report(workdir):
    assert run(workdir, "diagnose", "ge.ini") in (EXIT_OK, EXIT_UNCERTIFIED)
    rep = json.loads((workdir / "out" / "diagnose.json").read_text())
    assert len(rep["autocorrelation"]["lags"]) == 5
    assert set(rep["oracle"]["chains"]) == {"da", "pxda"}


def test_bad_config_exit_code(workdir, caplog):
    (workdir / "bad.ini").write_text("[mixing]\nfamily = gamma\nshape = 1\n")
    assert run(workdir, "check", "bad.ini") == EXIT_FAIL
    (workdir / "y.csv").write_text("1\nfoo\n")
    assert run(workdir, "check", "ge.ini") == EXIT_FAIL
    assert "row 2, column 1" in caplog.text
