"""Correctness oracles for the samplers.

* :func:`grid_posterior_oracle` -- brute-force posterior for the scalar
  model (``p = d = 1``) on a ``(beta, log sigma)`` grid.
* :func:`geweke_joint_test` -- marginal-conditional vs successive-conditional
  simulation of ``(theta, y)`` under a bounded proper prior.
* :func:`autocorr_compare` -- lagged autocorrelations of a functional under
  the DA and Haar PX-DA chains, with batch-means standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from mixreg.chains import ChainOutput, batch_means_se, draw_params
from mixreg.mixing import Gamma, MixingDensity, log_error_density
from mixreg.model import RegressionData, _residuals
from mixreg.samplers import RngStream, sample_psi_many

AUDIT_TOL = 1e-6


class GridTooSmall(ValueError):
    """Posterior mass reaches the edge of the grid."""

    def __init__(self, message, expand):
        super().__init__(f"{message}; try widening the grid by a factor of {expand:g}")
        self.expand = expand


# -- grid oracle ---------------------------------------------------------------------

class _ErrorDensityTable:
    """``log f_h(r)`` on a log-spaced grid of squared norms, spline-interpolated."""

    def __init__(self, h: MixingDensity, r_max: float, r_min=1e-12, points_per_unit=12):
        self.r_min = r_min
        lo, hi = math.log(r_min), math.log(max(r_max, 10 * r_min)) + 0.5
        s = np.linspace(lo, hi, max(int((hi - lo) * points_per_unit), 16))
        vals = np.array([log_error_density(h, 1, math.exp(x)) for x in s])
        self.at_zero = log_error_density(h, 1, 0.0)
        self.spline = CubicSpline(s, vals)
        self.s_hi = hi

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if r.max(initial=0.0) > math.exp(self.s_hi):
            raise ValueError("squared norm outside the tabulated range")
        with np.errstate(divide="ignore"):
            s = np.log(np.maximum(r, self.r_min))
        return np.where(r < self.r_min, self.at_zero, self.spline(s))


@dataclass
class GridPosterior:
    """Normalized posterior mass on a ``(beta, log sigma)`` grid."""

    beta: np.ndarray
    log_sigma: np.ndarray
    mass: np.ndarray  # shape (len(beta), len(log_sigma))
    edge_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def sigma2(self):
        return np.exp(2.0 * self.log_sigma)

    def marginal_beta(self):
        return self.mass.sum(axis=1)

    def marginal_log_sigma(self):
        return self.mass.sum(axis=0)

    def _moments(self, values, weights):
        m = float(np.dot(weights, values))
        v = float(np.dot(weights, (values - m) ** 2))
        return m, math.sqrt(v)

    def beta_mean_sd(self):
        return self._moments(self.beta, self.marginal_beta())

    def sigma2_mean_sd(self):
        return self._moments(self.sigma2, self.marginal_log_sigma())

    def quantile(self, which: str, q: float) -> float:
        """Quantile of the ``"beta"`` or ``"sigma2"`` marginal (linear interpolation of the CDF)."""
        if which == "beta":
            x, w = self.beta, self.marginal_beta()
        elif which == "sigma2":
            x, w = self.sigma2, self.marginal_log_sigma()
        else:
            raise ValueError("which must be 'beta' or 'sigma2'")
        cdf = np.cumsum(w)
        return float(np.interp(q, cdf, x))

    def summary(self):
        bm, bs = self.beta_mean_sd()
        sm, ss = self.sigma2_mean_sd()
        return {"beta_mean": bm, "beta_sd": bs, "sigma2_mean": sm, "sigma2_sd": ss,
                "edge_mass": self.edge_mass, **self.meta}


def default_grid(data: RegressionData, n_beta=400, n_log_sigma=400, beta_ses=10.0, log_sigma_halfwidth=6.0):
    """OLS-centred grid: ``beta_hat +- beta_ses`` robust SEs, ``log sigma_hat +- halfwidth``."""
    x, y = data.X[:, 0], data.y[:, 0]
    bhat = float(x @ y / (x @ x))
    resid = y - bhat * x
    mad = 1.4826 * float(np.median(np.abs(resid - np.median(resid))))
    sd = float(np.sqrt(resid @ resid / max(data.n - 1, 1)))
    sig = max(sd, mad)
    se = sig / math.sqrt(float(x @ x))
    return {
        "beta": (bhat - beta_ses * se, bhat + beta_ses * se, n_beta),
        "log_sigma": (math.log(sig) - log_sigma_halfwidth, math.log(sig) + log_sigma_halfwidth, n_log_sigma),
    }


def grid_posterior_oracle(data: RegressionData, h: MixingDensity, grid: dict | None = None, *,
                          log_error=None, audit=True) -> GridPosterior:
    """Brute-force posterior of ``(beta, sigma^2)`` for ``p = d = 1``.

    Each node carries ``prod_i f_h(r_i)/sigma * (sigma^2)^-a * sigma^2``;
    the last factor is the Jacobian of ``sigma^2 -> log sigma``.  ``f_h``
    comes from :func:`mixreg.mixing.log_error_density` through a spline
    table in ``log r`` unless ``log_error(r)`` is supplied.

    Raises :class:`GridTooSmall` when more than ``1e-6`` of the mass sits
    on the two outermost lines of either axis.
    """
    if data.p != 1 or data.d != 1:
        raise ValueError("the grid oracle needs p = d = 1")
    if data.n > 12:
        raise ValueError("the grid oracle is meant for n <= 12")
    grid = grid or default_grid(data)
    b = np.linspace(*grid["beta"])
    ls = np.linspace(*grid["log_sigma"])
    x, y = data.X[:, 0], data.y[:, 0]
    e = y[None, :] - b[:, None] * x[None, :]                 # (B, n)
    inv_s2 = np.exp(-2.0 * ls)                                 # (L,)
    r = (e * e)[:, None, :] * inv_s2[None, :, None]            # (B, L, n)
    if log_error is None:
        table = _ErrorDensityTable(h, float(r.max()))
        log_error = table
    loglik = log_error(r).sum(axis=2) - data.n * ls[None, :]
    logpost = loglik + (2.0 - 2.0 * data.a) * ls[None, :]
    logpost -= logpost.max()
    w = np.exp(logpost)
    mass = w / w.sum()
    mass /= mass.sum()
    edge = float(mass[:2, :].sum() + mass[-2:, :].sum() + mass[:, :2].sum() + mass[:, -2:].sum())
    post = GridPosterior(b, ls, mass, edge, {"grid": {k: list(v) for k, v in grid.items()}})
    if audit and edge > AUDIT_TOL:
        raise GridTooSmall(f"{edge:.3g} of the posterior mass lies on the grid boundary", 2.0)
    return post


# -- Geweke joint test ------------------------------------------------------------------

FUNCTIONALS = ("beta", "beta^2", "sigma2", "sigma2^2", "log_sigma", "r1", "r1^2", "beta*y1")


def _functionals(beta, sigma2, y, x):
    r1 = (y[0] - beta * x[0]) ** 2 / sigma2
    return np.array([beta, beta * beta, sigma2, sigma2 * sigma2, 0.5 * math.log(sigma2),
                     r1, r1 * r1, beta * y[0]])


@dataclass
class GewekeReport:
    names: tuple
    mean_marginal: np.ndarray
    mean_successive: np.ndarray
    z: np.ndarray
    trials: int
    rejections: int
    settings: dict

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z)))

    def as_dict(self):
        return {"functionals": list(self.names), "z": self.z.tolist(),
                "mean_marginal": self.mean_marginal.tolist(),
                "mean_successive": self.mean_successive.tolist(),
                "max_abs_z": self.max_abs_z, "trials": self.trials,
                "box_rejections": self.rejections, **self.settings}


def geweke_joint_test(n: int = 5, h: MixingDensity | None = None, trials: int = 10_000, *,
                      seed: int = 0, beta_bound=3.0, log_sigma_bound=1.0, df_offset=0.0,
                      x=None, max_box_tries=100_000) -> GewekeReport:
    """Marginal-conditional vs successive-conditional test for ``p = d = 1``.

    The improper prior has no forward sampler, so the test uses the proper
    surrogate ``beta ~ U(-B, B)``, ``log sigma ~ U(-L, L)``, which is the
    ``a = 1`` prior restricted to a box.  Under it the ``(beta, sigma^2)``
    conditional is the sampler's conditional truncated to the box, drawn by
    rejection.  ``df_offset`` perturbs the inverse-Wishart degrees of
    freedom (mutation testing).
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    h = h or Gamma(5.0, 5.0)
    x = np.linspace(0.5, 2.0, n) if x is None else np.asarray(x, dtype=float)
    X = x[:, None]
    m = n - 1 + 2 * 1.0 - 1 - 1 + df_offset
    gen = RngStream(seed, 0).generator()
    gen_sc = RngStream(seed, 1).generator()

    def prior(rng):
        return rng.uniform(-beta_bound, beta_bound), math.exp(2.0 * rng.uniform(-log_sigma_bound, log_sigma_bound))

    def data_given(beta, sigma2, rng):
        z = sample_latent_prior(h, n, rng)
        return beta * x + math.sqrt(sigma2) * rng.standard_normal(n) / np.sqrt(z)

    # marginal-conditional: independent (theta, y) draws
    mc = np.empty((trials, len(FUNCTIONALS)))
    for i in range(trials):
        beta, s2 = prior(gen)
        y = data_given(beta, s2, gen)
        mc[i] = _functionals(beta, s2, y, x)

    # successive-conditional: theta | y by one DA step, then y | theta
    sc = np.empty_like(mc)
    beta, s2 = prior(gen_sc)
    y = data_given(beta, s2, gen_sc)
    rejections = 0
    lo2, hi2 = math.exp(-2 * log_sigma_bound), math.exp(2 * log_sigma_bound)
    for i in range(trials):
        r = _residuals(np.array([[beta]]), np.array([[s2]]), X, y[:, None])
        z = sample_psi_many(h, 1, r, gen_sc)
        for _ in range(max_box_tries):
            bb, ss = draw_params(z, X, y[:, None], m, gen_sc)
            nb, ns = float(bb[0, 0]), float(ss[0, 0])
            if abs(nb) <= beta_bound and lo2 <= ns <= hi2:
                break
            rejections += 1
        else:
            raise RuntimeError("box rejection exceeded its budget")
        beta, s2 = nb, ns
        y = data_given(beta, s2, gen_sc)
        sc[i] = _functionals(beta, s2, y, x)

    mean_mc, mean_sc = mc.mean(axis=0), sc.mean(axis=0)
    var_mc = mc.var(axis=0, ddof=1) / trials
    se_sc = np.array([batch_means_se(sc[:, j]) for j in range(sc.shape[1])])
    z = (mean_mc - mean_sc) / np.sqrt(var_mc + se_sc ** 2)
    return GewekeReport(FUNCTIONALS, mean_mc, mean_sc, z, trials, rejections,
                        {"n": n, "h": h.to_dict(), "df_offset": df_offset, "seed": seed,
                         "beta_bound": beta_bound, "log_sigma_bound": log_sigma_bound})


def sample_latent_prior(h: MixingDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws from ``h`` itself (``psi`` with ``s = 0`` and ``d = 0``)."""
    if isinstance(h, Gamma):
        return rng.gamma(h.shape, 1.0 / h.rate, size=n)
    return sample_psi_many(h, 0, np.zeros(n), rng)


# -- autocorrelation comparison -------------------------------------------------------

def _extract(output: ChainOutput, functional):
    if callable(functional):
        return np.asarray(functional(output), dtype=float)
    name, _, idx = functional.partition("[")
    idx = tuple(int(i) for i in idx.rstrip("]").split(",")) if idx else (0, 0)
    if name == "beta":
        return output.beta[(slice(None),) + idx]
    if name == "sigma":
        return output.sigma[(slice(None),) + idx]
    raise ValueError(f"unknown functional {functional!r}; use beta[i,j], sigma[i,j] or a callable")


def autocorr_with_se(x, max_lag: int = 20):
    """Lag-``k`` autocorrelations for ``k = 1..max_lag`` with batch-means SEs.

    ``rho_k`` is the mean of ``w_t = (x_t - xbar)(x_{t+k} - xbar) / gamma_0``;
    its standard error is the batch-means SE of ``w_t``.
    """
    x = np.asarray(x, dtype=float)
    if x.size <= max_lag + 1:
        raise ValueError("series too short for the requested lags")
    dev = x - x.mean()
    g0 = float(dev @ dev) / x.size
    if g0 == 0:
        raise ValueError("constant series")
    acf, se = np.empty(max_lag), np.empty(max_lag)
    for k in range(1, max_lag + 1):
        w = dev[:-k] * dev[k:] / g0
        acf[k - 1] = w.mean()
        se[k - 1] = batch_means_se(w)
    return acf, se


@dataclass
class AutocorrReport:
    lags: np.ndarray
    acf_da: np.ndarray
    se_da: np.ndarray
    acf_pxda: np.ndarray
    se_pxda: np.ndarray

    @property
    def diff(self):
        """PX-DA minus DA autocorrelation at each lag."""
        return self.acf_pxda - self.acf_da

    @property
    def combined_se(self):
        return np.sqrt(self.se_da ** 2 + self.se_pxda ** 2)

    @property
    def ok(self):
        """PX-DA no larger than DA within three combined SEs, per lag."""
        return self.diff <= 3.0 * self.combined_se

    def as_dict(self):
        return {"lags": self.lags.tolist(), "acf_da": self.acf_da.tolist(), "se_da": self.se_da.tolist(),
                "acf_pxda": self.acf_pxda.tolist(), "se_pxda": self.se_pxda.tolist(),
                "diff": self.diff.tolist(), "ok": self.ok.tolist()}


def autocorr_compare(out_da: ChainOutput, out_pxda: ChainOutput, functional="beta[0,0]",
                     max_lag: int = 20) -> AutocorrReport:
    """Compare autocorrelations of ``functional`` under the two chains."""
    if len(out_da) != len(out_pxda):
        raise ValueError("outputs must have equal retained lengths")
    for key in ("iterations", "burn_in", "thin"):
        a, b = out_da.metadata.get(key), out_pxda.metadata.get(key)
        if a != b:
            raise ValueError(f"outputs differ in {key}: {a} vs {b}")
    a1, s1 = autocorr_with_se(_extract(out_da, functional), max_lag)
    a2, s2 = autocorr_with_se(_extract(out_pxda, functional), max_lag)
    return AutocorrReport(np.arange(1, max_lag + 1), a1, s1, a2, s2)
