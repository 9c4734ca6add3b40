import numpy as np
import pytest

from mixreg.config import ConfigError, DataError, RunConfig, effective_seed, read_matrix
from mixreg.mixing import Gamma, TruncatedShift

BASIC = """
[model]
a = 1.0
[mixing]
family = gamma
shape = 5
rate = 5
[chain]
algorithm = pxda
iterations = 100
burn_in = 10
seed = 42
"""


def test_parse_defaults_and_values():
    cfg = RunConfig.parse(BASIC)
    assert cfg.chain.algorithm == "pxda" and cfg.chain.seed == 42
    assert cfg.mixing_density(1) == Gamma(5.0, 5.0)
    assert cfg.check.zeta == 1.5 and cfg.output.formats == ("json", "text")


def test_emit_round_trip():
    cfg = RunConfig.parse(BASIC)
    again = RunConfig.parse(cfg.emit())
    assert again.emit() == cfg.emit()
    assert again.mixing == cfg.mixing


def test_truncated_shift_keys_stay_strings():
    text = BASIC.replace("family = gamma\nshape = 5\nrate = 5",
                         "family = truncated_shift\neta = 0.5\ninner_family = gamma\n"
                         "inner_shape = 2\ninner_rate = 1")
    h = RunConfig.parse(text).mixing_density(1)
    assert isinstance(h, TruncatedShift) and h.eta == 0.5 and h.inner == Gamma(2.0, 1.0)


@pytest.mark.parametrize("edit, match", [
    (("algorithm = pxda", "algorithm = mh"), "algorithm"),
    (("burn_in = 10", "burn_in = 100"), "burn_in"),
    (("seed = 42", "seed = -1"), "seed"),
    (("shape = 5", "shape = -5"), "mixing"),
    (("shape = 5", "shape = five"), "mixing.shape"),
    (("[chain]", "[chains]"), "unknown section"),
    (("seed = 42", "seed = 42\ncolour = red"), "unknown key"),
    (("family = gamma", "family = nope"), "mixing"),
])
def test_invalid_configs(edit, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.parse(BASIC.replace(*edit))


def test_rho_tau_must_come_together():
    with pytest.raises(ConfigError):
        RunConfig.parse(BASIC + "[check]\nrho = 1.0\n")


def test_seed_precedence(monkeypatch):
    cfg = RunConfig.parse(BASIC)
    monkeypatch.delenv("MIXREG_SEED", raising=False)
    assert effective_seed(cfg, None) == 42
    monkeypatch.setenv("MIXREG_SEED", "7")
    assert effective_seed(cfg, None) == 7
    assert effective_seed(cfg, 3) == 3
    monkeypatch.setenv("MIXREG_SEED", "x")
    with pytest.raises(ConfigError):
        effective_seed(cfg, None)


def test_semantic_hash_ignores_formatting_but_tracks_data(tmp_path):
    (tmp_path / "y.csv").write_text("1\n2\n3\n")
    (tmp_path / "x.csv").write_text("1\n1\n1\n")
    a = RunConfig.parse(BASIC, tmp_path)
    b = RunConfig.parse("# comment\n" + BASIC.replace("rate = 5", "rate = 5.0"), tmp_path)
    before = a.semantic_hash()
    assert before == b.semantic_hash()
    (tmp_path / "y.csv").write_text("1\n2\n5\n")
    assert a.semantic_hash() != before


def test_read_matrix_and_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n3,4\n\n")
    np.testing.assert_array_equal(read_matrix(p), [[1, 2], [3, 4]])
    p.write_text("1,2\n3,abc\n")
    with pytest.raises(DataError, match="row 2, column 2"):
        read_matrix(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(DataError, match="row 2"):
        read_matrix(p)
    p.write_text("1,nan\n")
    with pytest.raises(DataError, match="non-finite"):
        read_matrix(p)
    with pytest.raises(DataError):
        read_matrix(tmp_path / "missing.csv")


def test_load_data_checks_rows(tmp_path):
    (tmp_path / "y.csv").write_text("1\n2\n3\n")
    (tmp_path / "x.csv").write_text("1\n1\n")
    with pytest.raises(DataError, match="rows"):
        RunConfig.parse(BASIC, tmp_path).load_data()
