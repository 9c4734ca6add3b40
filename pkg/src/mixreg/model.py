"""Regression data, chain state and the linear algebra shared by both samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Evidence:
    """One named numeric check inside a report."""

    name: str
    passed: bool | None
    value: object = None
    detail: str = ""
    data: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"name": self.name, "passed": self.passed}
        if self.value is not None:
            out["value"] = self.value
        if self.detail:
            out["detail"] = self.detail
        if self.data:
            out["data"] = self.data
        return out


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Responses ``y`` (n x d), covariates ``X`` (n x p) and prior exponent ``a``.

    The prior is ``omega(beta, Sigma) ~ |Sigma|^-a`` on positive definite
    ``Sigma`` and flat in ``beta``.
    """

    y: np.ndarray
    X: np.ndarray
    a: float

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 2 or X.ndim != 2:
            raise ValueError("y and X must be matrices")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        if min(y.shape + X.shape) < 1:
            raise ValueError("need n, p, d >= 1")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise ValueError("y and X must contain only finite values")
        if not np.isfinite(self.a):
            raise ValueError("prior exponent a must be finite")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "a", float(self.a))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def d(self):
        return self.y.shape[1]

    @cached_property
    def rank(self) -> int:
        """Numerical rank of ``(X : y)``."""
        lam = np.hstack([self.X, self.y])
        sv = np.linalg.svd(lam, compute_uv=False)
        if sv.size == 0 or sv[0] == 0:
            return 0
        tol = max(lam.shape) * sv[0] * 1e-12
        return int((sv > tol).sum())

    @property
    def iw_degrees(self) -> float:
        """Degrees of freedom ``n - p + 2a - d - 1`` of the Sigma conditional."""
        return self.n - self.p + 2 * self.a - self.d - 1

    @property
    def haar_power(self) -> float:
        """``(d + 1 - 2a) d / 2``, the extra power of ``v`` in the Haar step."""
        return (self.d + 1 - 2 * self.a) * self.d / 2.0


@dataclass(frozen=True, eq=False)
class ChainState:
    beta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if beta.ndim != 2:
            raise ValueError("beta must be a p x d matrix")
        if sigma.shape != (beta.shape[1], beta.shape[1]):
            raise ValueError("sigma must be d x d with d = beta.shape[1]")
        if np.abs(sigma - sigma.T).max() > SYMMETRY_TOL * max(1.0, np.abs(sigma).max()):
            raise ValueError("sigma is not symmetric")
        sigma = (sigma + sigma.T) / 2
        if not np.all(np.linalg.eigvalsh(sigma) > 0):
            raise ValueError("sigma is not positive definite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def _trusted(cls, beta, sigma):
        # skip validation for states produced by the samplers
        obj = object.__new__(cls)
        object.__setattr__(obj, "beta", beta)
        object.__setattr__(obj, "sigma", (sigma + sigma.T) / 2)
        return obj


def as_latent(z) -> np.ndarray:
    """Validate a latent vector: every entry finite and strictly positive."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or not np.all(np.isfinite(z)) or not np.all(z > 0):
        raise ValueError("latent vector must be a 1-d array of positive finite values")
    return z


@dataclass(frozen=True, eq=False)
class WeightedStats:
    omega: np.ndarray
    mu: np.ndarray
    scale: np.ndarray


@dataclass
class ProprietyReport:
    """Outcome of the four posterior-propriety conditions."""

    checks: list[Evidence]

    @property
    def proper(self) -> bool:
        return all(c.passed for c in self.checks if c.name in ("S1", "S2", "S3", "S4"))

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {"proper": self.proper, "checks": [c.as_dict() for c in self.checks]}


def validate_data(data: RegressionData, h) -> ProprietyReport:
    """Check the sufficient conditions for a proper posterior.

    S1: rank(X : y) = p + d.  S2: n > p + 2d - 2a.  S3 and S4 are moment
    conditions on ``h`` of order ``d/2`` and ``-(n - p + 2a - 2d - 1)/2``.
    """
    from mixreg.mixing import moment_integral

    n, p, d, a = data.n, data.p, data.d, data.a
    checks = [
        Evidence("S1", data.rank == p + d, data.rank, f"rank(X:y) must equal p+d={p + d}"),
        Evidence("S2", n > p + 2 * d - 2 * a, n, f"n must exceed p+2d-2a={p + 2 * d - 2 * a:g}"),
    ]
    s3 = moment_integral(h, d / 2.0)
    checks.append(Evidence("S3", s3.finite, s3.value, f"int u^{d / 2:g} h(u) du < inf ({s3.status.value})",
                           data=s3.as_dict()))
    s4_exp = -(n - p + 2 * a - 2 * d - 1) / 2.0
    shortcut = (n - p + 2 * a - 2 * d - 1) < 0
    if shortcut and s3.finite and checks[1].passed:
        checks.append(Evidence("S4", True, None,
                               f"exponent {s4_exp:g} in (0, 1/2): implied by S3 given S2"))
    else:
        s4 = moment_integral(h, s4_exp)
        checks.append(Evidence("S4", s4.finite, s4.value,
                               f"int u^{s4_exp:g} h(u) du < inf ({s4.status.value})", data=s4.as_dict()))
    checks.append(Evidence("S4_implied_by_S3", shortcut, n - p + 2 * a - 2 * d - 1,
                           "n-p+2a-2d-1 < 0"))
    return ProprietyReport(checks)


def compute_residuals(state: ChainState, data: RegressionData) -> np.ndarray:
    """``r_i = (beta^T x_i - y_i)^T Sigma^-1 (beta^T x_i - y_i)`` for every row."""
    return _residuals(state.beta, state.sigma, data.X, data.y)


def _residuals(beta, sigma, X, y):
    e = X @ beta - y
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("degenerate state: sigma is numerically singular") from exc
    w = np.linalg.solve(L, e.T)
    return np.einsum("ij,ij->j", w, w)


def compute_weighted_stats(z, data: RegressionData) -> WeightedStats:
    """``Omega = (X^T diag(z) X)^-1``, ``mu = Omega X^T diag(z) y`` and the
    residual scale ``y^T diag(z) y - mu^T Omega^-1 mu``."""
    z = as_latent(z)
    if z.size != data.n:
        raise ValueError("latent vector length must equal n")
    return _weighted_stats(z, data.X, data.y)


def _weighted_stats(z, X, y):
    Xz = X * z[:, None]
    prec = X.T @ Xz
    try:
        C = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("X^T Q^-1 X is singular") from exc
    Ci = np.linalg.inv(C)
    omega = Ci.T @ Ci
    xty = Xz.T @ y
    mu = omega @ xty
    w = Ci @ xty
    scale = (y * z[:, None]).T @ y - w.T @ w
    return WeightedStats((omega + omega.T) / 2, mu, (scale + scale.T) / 2)


def ols_state(data: RegressionData, ridge=1e-6) -> ChainState:
    """Least-squares ``beta`` with the residual covariance plus a small ridge."""
    beta, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    resid = data.y - data.X @ beta
    dof = max(data.n - data.p, 1)
    sigma = resid.T @ resid / dof + ridge * np.eye(data.d)
    return ChainState(beta, sigma)
