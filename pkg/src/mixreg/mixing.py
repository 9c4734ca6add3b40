"""Mixing densities ``h`` on ``(0, inf)`` for normal scale mixtures.

Every density is evaluated on the log scale ``t = log u`` (``log_pdf_t``) so
that behaviour near the origin and in the tail can be probed far beyond the
range where ``u`` itself is representable without losing digits.

Parameterizations::

    Gamma(shape, rate)            rate^shape u^(shape-1) e^(-rate u) / Gamma(shape)
    InvertedGamma(alpha, gamma)   b u^(-alpha-1) e^(-gamma/u)
    LogNormal(mu, gamma)          (b/u) exp{-(log u - mu)^2 / (2 gamma)}   (gamma = variance)
    GIG(v, alpha, gamma)          b u^(v-1) exp{-(alpha u + gamma/u)/2}
    Frechet(alpha, gamma)         b u^(-(alpha+1)) exp{-(gamma/u)^alpha}
    TruncatedShift(inner, eta)    inner(u - eta) on (eta, inf)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Any, Callable, ClassVar

import numpy as np
from scipy import special

from mixreg._quad import (LN10, T_MAX, T_MIN, ShellStatus, ShellTable, judge_shells,
                          log_integrate, log_integrate_piece)

NORMALIZATION_TOL = 1e-4


class OriginKind(enum.Enum):
    ZERO = "zero_near_origin"
    POLYNOMIAL = "polynomial"
    FASTER = "faster_than_polynomial"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class OriginClass:
    """Behaviour of ``h`` as ``u -> 0``.

    ``heuristic`` is set when the class was inferred numerically from a grid
    rather than read off the family's closed form.
    """

    kind: OriginKind
    eta0: float | None = None
    power: float | None = None
    heuristic: bool = False
    evidence: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind is OriginKind.ZERO and not (self.eta0 and self.eta0 > 0):
            raise ValueError("zero-near-origin class needs eta0 > 0")
        if self.kind is OriginKind.POLYNOMIAL and not (self.power is not None and self.power > -1):
            raise ValueError("polynomial class needs power c > -1")

    def as_dict(self):
        out = {"kind": self.kind.value, "heuristic": self.heuristic}
        if self.eta0 is not None:
            out["eta0"] = self.eta0
        if self.power is not None:
            out["power"] = self.power
        if self.evidence:
            out["evidence"] = self.evidence
        return out


class MomentStatus(enum.Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class MomentResult:
    status: MomentStatus
    value: float | None = None
    method: str = "analytic"
    shells: dict = field(default_factory=dict)

    @property
    def finite(self):
        return self.status is MomentStatus.FINITE

    def as_dict(self):
        out = {"status": self.status.value, "method": self.method}
        if self.value is not None:
            out["value"] = self.value
        if self.shells:
            out["shells"] = self.shells
        return out


class MixingDensity:
    """Base class.  Subclasses implement :meth:`log_pdf_t`."""

    family: ClassVar[str] = "abstract"
    support: tuple[float, float] = (0.0, math.inf)

    def log_pdf_t(self, t):
        """``log h(exp(t))`` for an array of ``t``."""
        raise NotImplementedError

    def logpdf(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(~(u > 0)):
            raise ValueError("mixing density is only defined for u > 0")
        lo, hi = self.support
        with np.errstate(divide="ignore"):
            out = np.asarray(self.log_pdf_t(np.log(u)), dtype=float)
        out = np.where((u > lo) & (u < hi), out, -np.inf)
        return out if out.ndim else float(out)

    def pdf(self, u):
        return np.exp(self.logpdf(u))

    def dlogpdf(self, u):
        """Analytic derivative of ``log h``; ``None`` when unavailable."""
        return None

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def origin_class(self) -> OriginClass:
        return classify_origin_numeric(self)

    def moment(self, k: float) -> MomentResult:
        return moment_numeric(self, k)

    def surrogate_choice(self) -> tuple[float, float] | None:
        """A ``(rho, tau)`` pair known to make ``h / g_{rho,tau}`` monotone near 0."""
        return None

    @property
    def positive_near_origin(self) -> bool:
        return self.support[0] == 0.0

    def t_bounds(self):
        lo, hi = self.support
        return (math.log(lo) if lo > 0 else -math.inf,
                math.log(hi) if math.isfinite(hi) else math.inf)

    def check_normalized(self):
        lo, hi = self.t_bounds()
        log_mass = log_integrate(lambda t: self.log_pdf_t(t) + t, lo, hi)
        mass = math.exp(log_mass) if np.isfinite(log_mass) else 0.0
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"{self!r} integrates to {mass:.8g}, not 1")
        return mass

    def to_dict(self):
        return {"family": self.family, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


@dataclass(frozen=True, repr=False)
class Gamma(MixingDensity):
    shape: float
    rate: float
    family: ClassVar[str] = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))
        self.check_normalized()

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return (self.shape * math.log(self.rate) - special.gammaln(self.shape)
                    + (self.shape - 1.0) * t - self.rate * np.exp(t))

    def dlogpdf(self, u):
        return (self.shape - 1.0) / u - self.rate

    def params(self):
        return {"shape": self.shape, "rate": self.rate}

    def origin_class(self):
        return OriginClass(OriginKind.POLYNOMIAL, power=self.shape - 1.0)

    def moment(self, k):
        if k <= -self.shape:
            return MomentResult(MomentStatus.DIVERGENT, method="analytic: needs k > -shape")
        val = math.exp(special.gammaln(self.shape + k) - special.gammaln(self.shape)
                       - k * math.log(self.rate))
        return MomentResult(MomentStatus.FINITE, val)


@dataclass(frozen=True, repr=False)
class InvertedGamma(MixingDensity):
    alpha: float
    gamma: float
    family: ClassVar[str] = "inverted_gamma"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))
        self.check_normalized()

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return (self.alpha * math.log(self.gamma) - special.gammaln(self.alpha)
                    - (self.alpha + 1.0) * t - self.gamma * np.exp(-t))

    def dlogpdf(self, u):
        return -(self.alpha + 1.0) / u + self.gamma / u**2

    def params(self):
        return {"alpha": self.alpha, "gamma": self.gamma}

    def origin_class(self):
        return OriginClass(OriginKind.FASTER)

    def moment(self, k):
        if k >= self.alpha:
            return MomentResult(MomentStatus.DIVERGENT, method="analytic: needs k < alpha")
        val = math.exp(k * math.log(self.gamma) + special.gammaln(self.alpha - k)
                       - special.gammaln(self.alpha))
        return MomentResult(MomentStatus.FINITE, val)

    def surrogate_choice(self):
        return 1.0, -(self.alpha + 1.0)


@dataclass(frozen=True, repr=False)
class LogNormal(MixingDensity):
    mu: float
    gamma: float
    family: ClassVar[str] = "log_normal"

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))
        self.check_normalized()

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        return -0.5 * math.log(2 * math.pi * self.gamma) - t - (t - self.mu) ** 2 / (2 * self.gamma)

    def dlogpdf(self, u):
        return -1.0 / u - (np.log(u) - self.mu) / (self.gamma * u)

    def params(self):
        return {"mu": self.mu, "gamma": self.gamma}

    def origin_class(self):
        return OriginClass(OriginKind.FASTER)

    def moment(self, k):
        return MomentResult(MomentStatus.FINITE, math.exp(k * self.mu + 0.5 * k * k * self.gamma))

    def surrogate_choice(self):
        return 1.0 / (2.0 * self.gamma), self.mu / self.gamma - 1.0


def _log_bessel_k(v, x):
    return math.log(special.kve(v, x)) - x


@dataclass(frozen=True, repr=False)
class GIG(MixingDensity):
    v: float
    alpha: float
    gamma: float
    family: ClassVar[str] = "gig"

    def __post_init__(self):
        object.__setattr__(self, "v", float(self.v))
        if not math.isfinite(self.v):
            raise ValueError("v must be finite")
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))
        self.check_normalized()

    @property
    def log_norm(self):
        omega = math.sqrt(self.alpha * self.gamma)
        return 0.5 * self.v * math.log(self.alpha / self.gamma) - math.log(2.0) - _log_bessel_k(self.v, omega)

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return (self.log_norm + (self.v - 1.0) * t
                    - 0.5 * (self.alpha * np.exp(t) + self.gamma * np.exp(-t)))

    def dlogpdf(self, u):
        return (self.v - 1.0) / u - self.alpha / 2.0 + self.gamma / (2.0 * u**2)

    def params(self):
        return {"v": self.v, "alpha": self.alpha, "gamma": self.gamma}

    def origin_class(self):
        return OriginClass(OriginKind.FASTER)

    def moment(self, k):
        omega = math.sqrt(self.alpha * self.gamma)
        val = math.exp(0.5 * k * math.log(self.gamma / self.alpha)
                       + _log_bessel_k(self.v + k, omega) - _log_bessel_k(self.v, omega))
        return MomentResult(MomentStatus.FINITE, val)

    def surrogate_choice(self):
        return 1.0, self.v - 1.0


@dataclass(frozen=True, repr=False)
class Frechet(MixingDensity):
    alpha: float
    gamma: float
    family: ClassVar[str] = "frechet"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))
        self.check_normalized()

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        a, g = self.alpha, self.gamma
        with np.errstate(over="ignore"):
            return (math.log(a) + a * math.log(g) - (a + 1.0) * t
                    - np.exp(a * (math.log(g) - t)))

    def dlogpdf(self, u):
        a, g = self.alpha, self.gamma
        return -(a + 1.0) / u + a * g**a * u ** (-a - 1.0)

    def params(self):
        return {"alpha": self.alpha, "gamma": self.gamma}

    def origin_class(self):
        return OriginClass(OriginKind.FASTER)

    def moment(self, k):
        if k >= self.alpha:
            return MomentResult(MomentStatus.DIVERGENT, method="analytic: needs k < alpha")
        return MomentResult(MomentStatus.FINITE,
                            self.gamma**k * math.exp(special.gammaln(1.0 - k / self.alpha)))

    def surrogate_choice(self):
        return 1.0, -(self.alpha + 1.0)


@dataclass(frozen=True, repr=False)
class TruncatedShift(MixingDensity):
    """``inner`` moved right by ``eta``: zero on ``(0, eta]``."""

    inner: MixingDensity
    eta: float
    family: ClassVar[str] = "truncated_shift"

    def __post_init__(self):
        object.__setattr__(self, "eta", _positive("eta", self.eta))
        if self.inner.support[0] != 0.0:
            raise ValueError("inner density must be supported from the origin")

    @property
    def support(self):
        return (self.eta, self.inner.support[1] + self.eta)

    def log_pdf_t(self, t):
        t = np.asarray(t, dtype=float)
        le = math.log(self.eta)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            x = self.eta * np.expm1(t - le)
            out = self.inner.log_pdf_t(np.log(x))
        return np.where(x > 0, out, -np.inf)

    def dlogpdf(self, u):
        d = self.inner.dlogpdf(u - self.eta)
        return d

    def params(self):
        return {"eta": self.eta, **{f"inner_{k}": v for k, v in self.inner.to_dict().items()}}

    def origin_class(self):
        return OriginClass(OriginKind.ZERO, eta0=self.eta)

    def moment(self, k):
        if k > 0:
            inner = self.inner.moment(k)
            if inner.status is MomentStatus.DIVERGENT:
                return MomentResult(MomentStatus.DIVERGENT, method="analytic: inner tail moment diverges")
        lo, hi = self.t_bounds()
        lv = log_integrate(lambda t: self.log_pdf_t(t) + (k + 1.0) * t, lo, hi)
        return MomentResult(MomentStatus.FINITE, math.exp(lv), method="quadrature")


class Custom(MixingDensity):
    """User-supplied density.

    Parameters
    ----------
    log_density : callable
        Vectorized log-density.  Receives ``u`` or, with ``takes_log=True``,
        ``t = log u``.
    support : (lo, hi)
        Declared support endpoints; ``lo = 0`` means the density reaches the
        origin.
    normalize : bool
        Compute the normalizing constant by quadrature.  Otherwise the
        density must already integrate to one.
    positive_near_origin : bool
        Declaration that ``h > 0`` on some ``(0, eps)``; needed by the
        nested-integral trace-class checks.
    """

    family = "custom"

    def __init__(self, log_density: Callable, support=(0.0, math.inf), *, takes_log=False,
                 normalize=True, positive_near_origin: bool | None = None, name="custom",
                 spec: dict | None = None):
        lo, hi = float(support[0]), float(support[1])
        if not (0 <= lo < hi):
            raise ValueError("support must satisfy 0 <= lo < hi")
        self._fn = log_density
        self._takes_log = takes_log
        self.support = (lo, hi)
        self.name = name
        self._declared_positive = positive_near_origin
        self._spec = spec
        self._log_const = 0.0
        tlo, thi = self.t_bounds()
        log_mass = log_integrate(lambda t: self._raw(t) + t, tlo, thi)
        if not np.isfinite(log_mass):
            raise ValueError("custom density has zero or infinite mass")
        if normalize:
            self._log_const = -log_mass
        elif abs(math.exp(log_mass) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"custom density integrates to {math.exp(log_mass):.8g}")

    def _raw(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = self._fn(t) if self._takes_log else self._fn(np.exp(t))
        out = np.asarray(out, dtype=float)
        lo, hi = self.t_bounds()
        return np.where((t > lo) & (t < hi), out, -np.inf)

    def log_pdf_t(self, t):
        return self._raw(t) + self._log_const

    @property
    def log_normalizer(self):
        return self._log_const

    @property
    def positive_near_origin(self):
        if self.support[0] > 0:
            return False
        return bool(self._declared_positive)

    def params(self):
        return {"name": self.name, "support": list(self.support)}

    def to_dict(self):
        if self._spec is not None:
            return dict(self._spec)
        return {"family": self.family, **self.params()}

    def __repr__(self):
        return f"Custom(name={self.name!r}, support={self.support})"


def loglog_density(d: int) -> Custom:
    """Density on (0,1) that is faster than polynomial at 0 yet too thin for
    the nested-integral trace-class argument::

        h(u) = b exp{(log u) log(-log u) - (d/2 + 1) log u},  0 < u < 1.
    """
    c = d / 2.0 + 1.0

    def log_h(t):
        with np.errstate(invalid="ignore", divide="ignore"):
            return t * np.log(-t) - c * t

    return Custom(log_h, (0.0, 1.0), takes_log=True, normalize=True,
                  positive_near_origin=True, name=f"loglog_d{d}", spec={"family": "loglog"})


def uniform_density(lo: float, hi: float) -> Custom:
    width = hi - lo
    return Custom(lambda u: np.full(np.shape(u), -math.log(width)), (lo, hi),
                  normalize=False, name=f"uniform({lo:g},{hi:g})",
                  spec={"family": "uniform", "lo": lo, "hi": hi})


# -- operations --------------------------------------------------------------

def eval_log_h(h: MixingDensity, u):
    """Natural log of ``h(u)``; ``-inf`` off the support."""
    return h.logpdf(u)


def classify_origin(h: MixingDensity) -> OriginClass:
    try:
        return h.origin_class()
    except Exception:  # noqa: BLE001 - classification never raises
        return OriginClass(OriginKind.UNKNOWN, heuristic=True)


def classify_origin_numeric(h: MixingDensity) -> OriginClass:
    """Grid heuristic: slope of ``log h`` against ``log u`` on u = 1e-2 ... 1e-10."""
    lo = h.support[0]
    if lo > 0:
        return OriginClass(OriginKind.ZERO, eta0=lo, evidence={"declared_support": [lo, h.support[1]]})
    exps = np.arange(2, 11)
    t = -exps * LN10
    lh = np.asarray(h.log_pdf_t(t), dtype=float)
    ev = {"u": [float(10.0**-e) for e in exps], "log_h": [float(x) for x in lh]}
    if np.all(np.isneginf(lh)):
        return OriginClass(OriginKind.ZERO, eta0=1e-2, heuristic=True, evidence=ev)
    if not np.all(np.isfinite(lh)):
        return OriginClass(OriginKind.UNKNOWN, heuristic=True, evidence=ev)
    slopes = np.diff(lh) / np.diff(t)
    steps = np.diff(slopes)  # growth of the slope as u decreases
    ev["slopes"] = [float(s) for s in slopes]
    tail = steps[-4:]
    if np.all(np.abs(tail) < 1e-5) and slopes[-1] > -1:
        return OriginClass(OriginKind.POLYNOMIAL, power=float(slopes[-1]), heuristic=True, evidence=ev)
    if np.all(tail > 1e-3):
        return OriginClass(OriginKind.FASTER, heuristic=True, evidence=ev)
    return OriginClass(OriginKind.UNKNOWN, heuristic=True, evidence=ev)


def _decade_shells(logf, side, kmax):
    sign = -1.0 if side == "origin" else 1.0
    edges = sign * LN10 * np.arange(kmax + 1)
    shells = []
    for k in range(kmax):
        a, b = sorted((edges[k], edges[k + 1]))
        shells.append(log_integrate_piece(logf, a, b))
    return edges, np.array(shells)


def moment_numeric(h: MixingDensity, k: float, *, kmin=15, kmax=300) -> MomentResult:
    """Shell-tested quadrature of ``int u^k h(u) du``."""
    tlo, thi = h.t_bounds()

    def logf(t):
        return h.log_pdf_t(t) + (k + 1.0) * t

    tables = {}
    for side, bounded in (("origin", tlo > T_MIN), ("tail", thi < T_MAX)):
        if bounded:
            continue
        n = kmin
        while True:
            edges, ls = _decade_shells(logf, side, n)
            status, reason, ratios = judge_shells(ls, factor=0.9, run=5)
            if status is not ShellStatus.INCONCLUSIVE or n >= kmax:
                break
            n = min(4 * n, kmax)
        tables[side] = ShellTable(edges, ls, ratios, status, reason)
    shells = {s: tab.as_dict() for s, tab in tables.items()}
    if any(tab.status is ShellStatus.DIVERGENT for tab in tables.values()):
        return MomentResult(MomentStatus.DIVERGENT, method="shell test", shells=shells)
    if any(tab.status is ShellStatus.INCONCLUSIVE for tab in tables.values()):
        return MomentResult(MomentStatus.INCONCLUSIVE, method="shell test", shells=shells)
    value = math.exp(log_integrate(logf, tlo, thi))
    # cross-check: the decade shells tile (1e-K, 1e+K) and must carry the mass
    parts = [float(np.exp(tab.log_shells[np.isfinite(tab.log_shells)]).sum()) for tab in tables.values()]
    if "origin" not in tables and tlo < 0:
        parts.append(math.exp(log_integrate(logf, tlo, min(thi, 0.0))))
    if "tail" not in tables and thi > 0:
        parts.append(math.exp(log_integrate(logf, max(tlo, 0.0), thi)))
    shell_total = float(sum(parts))
    if abs(shell_total - value) > 1e-3 * max(value, 1e-300):
        return MomentResult(MomentStatus.INCONCLUSIVE, value, "quadrature disagrees with shells",
                            shells=shells)
    return MomentResult(MomentStatus.FINITE, value, "quadrature + shell test", shells=shells)


def moment_integral(h: MixingDensity, exponent: float) -> MomentResult:
    """``int_0^inf u^exponent h(u) du``: analytic criterion where known, else shells."""
    return h.moment(float(exponent))


def eval_error_density(h: MixingDensity, eps) -> float:
    """Scale-mixture error density ``f_h`` at the vector ``eps``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    return math.exp(log_error_density(h, eps.size, float(eps @ eps)))


def log_error_density(h: MixingDensity, d: int, r: float) -> float:
    """``log f_h`` as a function of the squared norm ``r`` in dimension ``d``."""
    tlo, thi = h.t_bounds()
    half_d = d / 2.0

    def logf(t):
        with np.errstate(over="ignore"):
            return (half_d + 1.0) * t - 0.5 * r * np.exp(t) + h.log_pdf_t(t)

    val = log_integrate(logf, tlo, thi, epsrel=1e-11)
    if not np.isfinite(val):
        raise ArithmeticError("error-density quadrature failed")
    return val - half_d * math.log(2.0 * math.pi)


# -- serialization -------------------------------------------------------------

_FAMILIES = {cls.family: cls for cls in (Gamma, InvertedGamma, LogNormal, GIG, Frechet)}


def from_dict(spec: dict, d: int | None = None) -> MixingDensity:
    """Build a density from ``{"family": name, **params}``."""
    spec = dict(spec)
    family = spec.pop("family")
    if family in _FAMILIES:
        cls = _FAMILIES[family]
        names = [f.name for f in fields(cls)]
        unknown = set(spec) - set(names)
        missing = set(names) - set(spec)
        if unknown or missing:
            raise ValueError(f"{family}: unknown {sorted(unknown)} / missing {sorted(missing)} parameters")
        return cls(**{k: float(spec[k]) for k in names})
    if family == "truncated_shift":
        eta = spec.pop("eta")
        inner = {k[len("inner_"):]: v for k, v in spec.items() if k.startswith("inner_")}
        if len(inner) != len(spec):
            raise ValueError("truncated_shift parameters must be eta and inner_*")
        return TruncatedShift(from_dict(inner), float(eta))
    if family == "loglog":
        if spec:
            raise ValueError("loglog takes no parameters")
        if d is None:
            raise ValueError("loglog density needs the response dimension d")
        return loglog_density(d)
    if family == "uniform":
        return uniform_density(float(spec["lo"]), float(spec["hi"]))
    raise ValueError(f"unknown mixing family {family!r}")
