import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixreg.mixing import Gamma, InvertedGamma
from mixreg.model import (ChainState, RegressionData, as_latent, compute_residuals,
                          compute_weighted_stats, ols_state, validate_data)


def test_shapes_and_derived_quantities(multivariate_data):
    data = multivariate_data
    assert (data.n, data.p, data.d) == (25, 2, 2)
    assert data.rank == 4
    assert data.iw_degrees == 25 - 2 + 2 - 2 - 1
    assert data.haar_power == (2 + 1 - 2) * 2 / 2


def test_vectors_are_promoted_to_columns():
    data = RegressionData([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 1.0)
    assert data.y.shape == (3, 1) and data.X.shape == (3, 1)


@pytest.mark.parametrize("y, X", [
    ([1.0, 2.0], [1.0, 2.0, 3.0]),
    ([1.0, np.nan], [1.0, 2.0]),
    ([1.0, np.inf], [1.0, 2.0]),
])
def test_bad_inputs_rejected(y, X):
    with pytest.raises(ValueError):
        RegressionData(y, X, 1.0)


def test_data_is_read_only(toy_data):
    with pytest.raises(ValueError):
        toy_data.y[0, 0] = 1.0


def test_rank_deficiency_fails_s1():
    X = np.c_[np.ones(6), np.arange(6.0)]
    y = (X @ np.array([[1.0], [2.0]]))       # y in the column space of X
    report = validate_data(RegressionData(y, X, 1.0), Gamma(3.0, 3.0))
    assert not report["S1"].passed
    assert not report.proper


def test_too_few_rows_fails_s2():
    data = RegressionData([[1.0, 0.3], [0.2, 2.0], [3.0, 1.0]], np.ones((3, 1)), 0.0)
    # n=3 must exceed p + 2d - 2a = 1 + 4 - 0 = 5
    assert not validate_data(data, Gamma(3.0, 3.0))["S2"].passed


def test_s3_fails_for_heavy_inverted_gamma(toy_data):
    # int u^{1/2} h(u) du diverges when alpha <= 1/2
    report = validate_data(toy_data, InvertedGamma(0.4, 1.0))
    assert report["S3"].passed is False


def test_s4_shortcut_when_exponent_negative():
    g = np.random.default_rng(0)
    data = RegressionData(g.normal(size=(4, 1)), np.ones((4, 1)), 0.0)
    # n - p + 2a - 2d - 1 = 4 - 1 + 0 - 2 - 1 = 0 -> moment condition evaluated
    rep = validate_data(data, Gamma(3.0, 3.0))
    assert rep["S4"].passed
    data = RegressionData(g.normal(size=(3, 1)), np.ones((3, 1)), 0.0)
    rep = validate_data(data, Gamma(3.0, 3.0))
    assert rep["S4_implied_by_S3"].passed and rep["S4"].passed


def test_s4_borderline_gamma_toy_is_divergent(toy_data, t4_mixing):
    # S4 needs int u^-2 h(u) du; Gamma(2, 2) diverges logarithmically there
    assert validate_data(toy_data, t4_mixing)["S4"].passed is False
    assert validate_data(toy_data, Gamma(2.5, 2.5)).proper


def test_chain_state_validation():
    with pytest.raises(ValueError, match="symmetric"):
        ChainState(np.zeros((1, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive definite"):
        ChainState(np.zeros((1, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        ChainState(np.zeros((1, 2)), np.eye(3))


def test_latent_validation():
    with pytest.raises(ValueError):
        as_latent([1.0, 0.0])
    with pytest.raises(ValueError):
        as_latent([1.0, np.inf])


def test_residuals_match_direct_formula(multivariate_data):
    data = multivariate_data
    st_ = ols_state(data)
    r = compute_residuals(st_, data)
    Si = np.linalg.inv(st_.sigma)
    e = data.X @ st_.beta - data.y
    np.testing.assert_allclose(r, np.einsum("ij,jk,ik->i", e, Si, e), rtol=1e-10)


def test_weighted_stats_with_unit_weights_equal_ols(multivariate_data):
    data = multivariate_data
    ws = compute_weighted_stats(np.ones(data.n), data)
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    np.testing.assert_allclose(ws.mu, beta, rtol=1e-10, atol=1e-12)
    resid = data.y - data.X @ beta
    np.testing.assert_allclose(ws.scale, resid.T @ resid, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.05, 20.0), min_size=8, max_size=8))
def test_weighted_stats_match_weighted_least_squares(weights):
    g = np.random.default_rng(11)
    X = np.c_[np.ones(8), g.normal(size=8)]
    y = g.normal(size=(8, 2))
    data = RegressionData(y, X, 1.0)
    z = np.array(weights)
    ws = compute_weighted_stats(z, data)
    W = np.diag(z)
    mu = np.linalg.solve(X.T @ W @ X, X.T @ W @ y)
    np.testing.assert_allclose(ws.mu, mu, rtol=1e-8, atol=1e-10)
    e = y - X @ mu
    np.testing.assert_allclose(ws.scale, e.T @ W @ e, rtol=1e-7, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(ws.scale) > 0)
