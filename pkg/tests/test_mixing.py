import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from mixreg.mixing import (GIG, Custom, Frechet, Gamma, InvertedGamma, LogNormal, MomentStatus,
                           OriginKind, TruncatedShift, classify_origin, classify_origin_numeric,
                           eval_error_density, from_dict, log_error_density, loglog_density,
                           moment_integral, moment_numeric, uniform_density)

BUILTINS = [Gamma(2.0, 3.0), InvertedGamma(2.5, 1.5), LogNormal(0.3, 0.8), GIG(0.5, 1.2, 2.0),
            Frechet(1.7, 0.9)]
SCIPY = [stats.gamma(2.0, scale=1 / 3.0), stats.invgamma(2.5, scale=1.5),
         stats.lognorm(math.sqrt(0.8), scale=math.exp(0.3)),
         stats.geninvgauss(0.5, math.sqrt(1.2 * 2.0), scale=math.sqrt(2.0 / 1.2)),
         stats.invweibull(1.7, scale=0.9)]


@pytest.mark.parametrize("h, ref", list(zip(BUILTINS, SCIPY)), ids=lambda x: repr(x)[:20])
def test_log_density_matches_scipy(h, ref):
    u = np.geomspace(5e-2, 20, 50)      # scipy's Frechet underflows below this
    np.testing.assert_allclose(h.logpdf(u), ref.logpdf(u), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("h", BUILTINS, ids=repr)
def test_analytic_derivative(h):
    u = np.geomspace(0.05, 10, 20)
    eps = 1e-6 * u
    fd = (h.logpdf(u + eps) - h.logpdf(u - eps)) / (2 * eps)
    np.testing.assert_allclose(h.dlogpdf(u), fd, rtol=1e-5)


@pytest.mark.parametrize("h", BUILTINS, ids=repr)
@pytest.mark.parametrize("k", [-0.7, 0.5, 1.0])
def test_closed_form_moments_agree_with_shell_quadrature(h, k):
    a = moment_integral(h, k)
    b = moment_numeric(h, k)
    assert a.status == b.status
    if a.finite:
        assert b.value == pytest.approx(a.value, rel=1e-6)


@pytest.mark.parametrize("h, k", [(Gamma(2.0, 2.0), -2.0), (InvertedGamma(1.5, 1.0), 1.5),
                                  (Frechet(1.0, 1.0), 1.0), (Gamma(0.5, 1.0), -0.6)])
def test_divergent_moments_detected_numerically(h, k):
    assert moment_integral(h, k).status is MomentStatus.DIVERGENT
    assert moment_numeric(h, k).status is MomentStatus.DIVERGENT


def test_origin_classes():
    assert classify_origin(Gamma(3.0, 1.0)).kind is OriginKind.POLYNOMIAL
    assert classify_origin(Gamma(3.0, 1.0)).power == 2.0
    for h in BUILTINS[1:]:
        assert classify_origin(h).kind is OriginKind.FASTER
    z = classify_origin(uniform_density(1.0, 2.0))
    assert z.kind is OriginKind.ZERO and z.eta0 == 1.0
    ts = classify_origin(TruncatedShift(Gamma(2.0, 1.0), 0.5))
    assert ts.kind is OriginKind.ZERO and ts.eta0 == 0.5


def test_numeric_origin_heuristic_agrees_with_closed_forms():
    assert classify_origin_numeric(Gamma(3.5, 2.0)).kind is OriginKind.POLYNOMIAL
    assert classify_origin_numeric(Gamma(3.5, 2.0)).power == pytest.approx(2.5, abs=1e-4)
    assert classify_origin_numeric(InvertedGamma(2.0, 1.0)).kind is OriginKind.FASTER
    loglog = classify_origin(loglog_density(1))
    assert loglog.kind is OriginKind.FASTER and loglog.heuristic


@pytest.mark.parametrize("h", BUILTINS + [loglog_density(2), uniform_density(1.0, 3.0),
                                          TruncatedShift(InvertedGamma(2.0, 1.0), 0.2)], ids=repr)
def test_every_density_integrates_to_one(h):
    # independent check with scipy's adaptive quadrature in t = log u
    lo, hi = h.t_bounds()
    lo, hi = max(lo, -60.0), min(hi, 60.0)
    val, _ = integrate.quad(lambda t: math.exp(float(h.log_pdf_t(t)) + t) if t > lo else 0.0,
                            lo, hi, limit=500)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_custom_normalizes_and_reports_support():
    h = Custom(lambda u: -u, positive_near_origin=True)    # exp(-u) up to a constant
    assert h.pdf(1.0) == pytest.approx(math.exp(-1.0), rel=1e-8)
    assert h.positive_near_origin
    with pytest.raises(ValueError):
        Custom(lambda u: np.zeros_like(u))                     # infinite mass
    with pytest.raises(ValueError):
        Custom(lambda u: -u, normalize=False, support=(0, 1))  # mass != 1


def test_parameter_validation():
    for bad in (lambda: Gamma(-1.0, 1.0), lambda: InvertedGamma(1.0, 0.0),
                lambda: LogNormal(math.nan, 1.0), lambda: GIG(1.0, -1.0, 1.0),
                lambda: Frechet(math.inf, 1.0)):
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(ValueError):
        Gamma(2.0, 2.0).logpdf(0.0)


def test_error_density_for_gamma_mixing_is_student_t():
    nu = 4.0
    h = Gamma(nu / 2, nu / 2)
    for e in (0.0, 0.3, 1.7, 6.0):
        assert eval_error_density(h, [e]) == pytest.approx(stats.t.pdf(e, nu), rel=1e-9)
    # multivariate t in d = 3
    x = np.array([0.4, -1.0, 2.0])
    r = float(x @ x)
    ref = stats.multivariate_t(loc=np.zeros(3), shape=np.eye(3), df=nu).logpdf(x)
    assert log_error_density(h, 3, r) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("h", BUILTINS, ids=repr)
def test_serialization_round_trip(h):
    assert from_dict(h.to_dict()) == h


def test_serialization_of_special_families():
    ts = TruncatedShift(Gamma(2.0, 1.0), 0.5)
    back = from_dict(ts.to_dict())
    assert isinstance(back, TruncatedShift) and back.eta == 0.5 and back.inner == ts.inner
    assert from_dict({"family": "loglog"}, d=2).name == "loglog_d2"
    assert from_dict({"family": "uniform", "lo": 1.0, "hi": 2.0}).support == (1.0, 2.0)
    with pytest.raises(ValueError):
        from_dict({"family": "gamma", "shape": 1.0})
    with pytest.raises(ValueError):
        from_dict({"family": "nope"})


@settings(max_examples=30, deadline=None)
@given(shape=st.floats(0.3, 20.0), rate=st.floats(0.05, 20.0), k=st.floats(-3.0, 3.0))
def test_gamma_moment_formula(shape, rate, k):
    m = Gamma(shape, rate).moment(k)
    if k <= -shape:
        assert m.status is MomentStatus.DIVERGENT
    else:
        assert m.value == pytest.approx(stats.gamma(shape, scale=1 / rate).expect(lambda u: u**k),
                                        rel=1e-5)
