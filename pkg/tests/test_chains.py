import numpy as np
import pytest

from mixreg.chains import (ChainConfig, ChainOutput, batch_means_se, da_iterate, draw_params,
                           haar_pxda_iterate, run_chain, summarize)
from mixreg.mixing import Gamma, InvertedGamma, uniform_density
from mixreg.model import ChainState, ols_state


def test_config_validation():
    with pytest.raises(ValueError):
        ChainConfig("gibbs")
    with pytest.raises(ValueError):
        ChainConfig(iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(thin=0)
    assert ChainConfig(iterations=110, burn_in=10, thin=3).retained == 33


def test_config_digest_tracks_fields():
    a = ChainConfig(seed=1)
    assert a.digest() == ChainConfig(seed=1).digest()
    assert a.digest() != ChainConfig(seed=2).digest()


@pytest.mark.parametrize("algorithm", ["da", "pxda"])
def test_run_chain_shapes_and_indices(multivariate_data, algorithm):
    cfg = ChainConfig(algorithm, iterations=60, burn_in=10, thin=5, seed=3, keep_latent=True)
    out = run_chain(cfg, multivariate_data, Gamma(3.0, 3.0))
    assert out.failure is None
    assert len(out) == cfg.retained == 10
    assert out.beta.shape == (10, 2, 2) and out.sigma.shape == (10, 2, 2)
    assert out.latent.shape == (10, multivariate_data.n)
    np.testing.assert_array_equal(out.iterations, np.arange(15, 61, 5))
    for s in out.states():
        assert np.all(np.linalg.eigvalsh(s.sigma) > 0)
        np.testing.assert_array_equal(s.sigma, s.sigma.T)
    assert out.metadata["algorithm"] == algorithm and out.metadata["seed"] == 3


def test_pxda_with_unit_rescale_is_da(multivariate_data):
    state = ols_state(multivariate_data)
    h = InvertedGamma(2.0, 2.0)
    s1, z1 = da_iterate(state, multivariate_data, h, np.random.default_rng(9))
    s2, z2 = haar_pxda_iterate(state, multivariate_data, h, np.random.default_rng(9), force_v=1.0)
    np.testing.assert_array_equal(s1.beta, s2.beta)
    np.testing.assert_array_equal(s1.sigma, s2.sigma)
    np.testing.assert_array_equal(z1, z2)


def test_same_seed_same_draws(toy_data, t4_mixing):
    cfg = ChainConfig("pxda", iterations=200, burn_in=20, seed=77)
    a = run_chain(cfg, toy_data, t4_mixing)
    b = run_chain(cfg, toy_data, t4_mixing)
    np.testing.assert_array_equal(a.beta, b.beta)
    np.testing.assert_array_equal(a.sigma, b.sigma)
    c = run_chain(ChainConfig("pxda", iterations=200, burn_in=20, seed=78), toy_data, t4_mixing)
    assert not np.array_equal(a.beta, c.beta)


def test_failure_is_recorded_not_raised(toy_data):
    # a support bounded away from zero is fine; an initial state far away is fine too,
    # but a kernel failure (singular design) must surface as a failure record
    X = np.ones((6, 2))
    from mixreg.model import RegressionData
    bad = RegressionData(toy_data.y, X, 1.0)
    init = ChainState(np.zeros((2, 1)), np.eye(1))
    out = run_chain(ChainConfig(iterations=5, initial=init), bad, Gamma(3.0, 3.0))
    assert out.failure is not None and "iteration 1" in out.failure
    assert len(out) == 0


def test_uniform_mixing_chain_runs(toy_data):
    out = run_chain(ChainConfig("pxda", iterations=50, seed=2), toy_data, uniform_density(1.0, 2.0))
    assert out.failure is None and len(out) == 50


def test_draw_params_conditional_moments():
    """Sigma | z has mean S/(m - d - 1); beta | Sigma, z has mean mu."""
    g = np.random.default_rng(4)
    n, p, d = 12, 2, 2
    X = np.c_[np.ones(n), g.normal(size=n)]
    y = g.normal(size=(n, d))
    z = g.gamma(2.0, 0.5, size=n)
    m = n - p + 2 * 1.0 - d - 1
    draws = [draw_params(z, X, y, m, g) for _ in range(20_000)]
    B = np.array([b for b, _ in draws])
    S = np.array([s for _, s in draws])
    W = np.diag(z)
    mu = np.linalg.solve(X.T @ W @ X, X.T @ W @ y)
    scale = (y - X @ mu).T @ W @ (y - X @ mu)
    se_s = S.std(axis=0) / np.sqrt(len(S))
    assert np.all(np.abs(S.mean(axis=0) - scale / (m - d - 1)) < 4 * se_s)
    se_b = B.std(axis=0) / np.sqrt(len(B))
    assert np.all(np.abs(B.mean(axis=0) - mu) < 4 * se_b)


def test_batch_means_se_for_iid_and_ar1():
    g = np.random.default_rng(0)
    x = g.normal(size=40_000)
    assert batch_means_se(x) == pytest.approx(1 / np.sqrt(x.size), rel=0.15)
    phi = 0.8
    y = np.empty_like(x)
    y[0] = x[0]
    for i in range(1, x.size):
        y[i] = phi * y[i - 1] + x[i]
    # long-run sd of the mean: sigma / (1 - phi) / sqrt(N)
    assert batch_means_se(y) == pytest.approx(1 / (1 - phi) / np.sqrt(y.size), rel=0.2)
    assert np.isnan(batch_means_se([1.0]))


def test_summarize_keys():
    s = summarize(np.random.default_rng(1).normal(2.0, 3.0, size=10_000))
    assert set(s) == {"mean", "sd", "mcse_mean", "mcse_sd"}
    assert s["mean"] == pytest.approx(2.0, abs=5 * s["mcse_mean"])
    assert s["sd"] == pytest.approx(3.0, abs=5 * s["mcse_sd"])


def test_chain_output_len():
    out = ChainOutput(np.zeros((3, 1, 1)), np.ones((3, 1, 1)), None, np.arange(1, 4))
    assert len(out) == 3
