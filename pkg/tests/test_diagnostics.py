import numpy as np
import pytest
from scipy import stats

from mixreg.chains import ChainConfig, ChainOutput, run_chain
from mixreg.diagnostics import (FUNCTIONALS, GridTooSmall, autocorr_compare, autocorr_with_se,
                                default_grid, geweke_joint_test, grid_posterior_oracle,
                                sample_latent_prior)
from mixreg.mixing import Gamma, InvertedGamma
from mixreg.model import RegressionData


def test_oracle_likelihood_matches_student_t(toy_data, t4_mixing):
    grid = default_grid(toy_data, 120, 120, 20, 8)
    ours = grid_posterior_oracle(toy_data, t4_mixing, grid, audit=False)
    closed = grid_posterior_oracle(toy_data, t4_mixing, grid, audit=False,
                                   log_error=lambda r: stats.t.logpdf(np.sqrt(r), 4.0))
    np.testing.assert_allclose(ours.mass, closed.mass, atol=1e-6)


def test_oracle_mass_normalized(toy_data, t4_mixing):
    post = grid_posterior_oracle(toy_data, t4_mixing, default_grid(toy_data, 100, 100, 20, 8),
                                 audit=False)
    assert post.mass.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(post.mass >= 0)


def test_oracle_symmetric_data_has_zero_mean():
    data = RegressionData([-1.3, 1.3, -0.4, 0.4], [1.0, 1.0, 2.0, 2.0], 1.0)
    grid = {"beta": (-8.0, 8.0, 401), "log_sigma": (-8.0, 8.0, 301)}
    post = grid_posterior_oracle(data, Gamma(3.0, 3.0), grid, audit=False)
    assert post.beta_mean_sd()[0] == pytest.approx(0.0, abs=1e-10)
    assert post.quantile("beta", 0.5) == pytest.approx(0.0, abs=0.05)


def test_oracle_audit_flags_small_grid(toy_data, t4_mixing):
    with pytest.raises(GridTooSmall) as info:
        grid_posterior_oracle(toy_data, t4_mixing, default_grid(toy_data, 60, 60, 2, 1))
    assert info.value.expand > 1


def test_oracle_rejects_multivariate(multivariate_data, t4_mixing):
    with pytest.raises(ValueError):
        grid_posterior_oracle(multivariate_data, t4_mixing)


def test_frozen_oracle_reference_matches_recomputation(toy_data, t4_mixing, oracle_reference):
    grid = {k: tuple(v[:2]) + (int(v[2]),) for k, v in oracle_reference["grid"].items()}
    post = grid_posterior_oracle(toy_data, t4_mixing, grid)
    for key, ref in oracle_reference["reference"].items():
        assert post.summary()[key] == pytest.approx(ref, rel=1e-12)


def test_geweke_passes_for_correct_conditionals():
    rep = geweke_joint_test(trials=10_000, seed=1)
    assert rep.names == FUNCTIONALS
    assert rep.max_abs_z < 4, rep.as_dict()


def test_geweke_catches_wrong_degrees_of_freedom():
    rep = geweke_joint_test(trials=10_000, seed=1, df_offset=1.0)
    assert rep.max_abs_z > 6, rep.as_dict()


def test_geweke_rejects_degenerate_config():
    with pytest.raises(ValueError):
        geweke_joint_test(trials=0)


def test_latent_prior_draws_follow_h(rng):
    h = InvertedGamma(3.0, 2.0)
    z = sample_latent_prior(h, 20_000, rng)
    assert stats.kstest(z, stats.invgamma(3.0, scale=2.0).cdf).pvalue > 1e-3


def test_autocorr_of_ar1(rng):
    phi = 0.6
    e = rng.normal(size=50_000)
    x = np.empty_like(e)
    x[0] = e[0]
    for i in range(1, x.size):
        x[i] = phi * x[i - 1] + e[i]
    acf, se = autocorr_with_se(x, 5)
    np.testing.assert_allclose(acf, phi ** np.arange(1, 6), atol=4 * se.max())
    with pytest.raises(ValueError):
        autocorr_with_se(np.ones(100), 5)


def test_autocorr_compare_checks_configs(toy_data, t4_mixing):
    a = run_chain(ChainConfig("da", 600, 100, seed=1), toy_data, t4_mixing)
    b = run_chain(ChainConfig("pxda", 600, 100, seed=1), toy_data, t4_mixing)
    rep = autocorr_compare(a, b, "beta[0,0]", 10)
    assert rep.lags.tolist() == list(range(1, 11))
    assert set(rep.as_dict()) >= {"acf_da", "acf_pxda", "ok", "diff"}
    c = run_chain(ChainConfig("pxda", 700, 200, seed=1), toy_data, t4_mixing)
    with pytest.raises(ValueError):
        autocorr_compare(a, c)
    short = ChainOutput(a.beta[:10], a.sigma[:10], None, a.iterations[:10], dict(a.metadata))
    with pytest.raises(ValueError):
        autocorr_compare(a, short)
    with pytest.raises(ValueError):
        autocorr_compare(a, b, "gamma[0]")
