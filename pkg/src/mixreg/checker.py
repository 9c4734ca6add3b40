"""Numerical certification of trace-class and geometric-ergodicity conditions.

Every check here reduces a statement about the behaviour of the mixing
density ``h`` near the origin to finitely many numbers -- a monotonicity
test on a grid, or a table of partial integrals over shells shrinking
towards zero -- and reports those numbers next to its verdict.  None of the
verdicts is a proof; each is labelled with the evidence it rests on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from mixreg._quad import (LN2, LN10, T_MIN, LogCumulative, ShellStatus, ShellTable,
                          judge_shells, log_integrate)
from mixreg.mixing import MixingDensity, OriginKind, classify_origin, moment_integral
from mixreg.model import Evidence
from mixreg.samplers import HaarDensity, SamplerError

ZETA = 1.5
RHO_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
TAU_GRID = tuple(range(-8, 9))
ETA_GRID = (1e-1, 1e-2, 1e-3)
MONOTONE_SLACK = 1e-10


# -- surrogate and kappa --------------------------------------------------------

@dataclass(frozen=True)
class SurrogateG:
    """``g(u) = exp{-rho (log u)^2 + tau log u}``."""

    rho: float
    tau: float

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError("rho must be positive")
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")

    def log_t(self, t):
        t = np.asarray(t, dtype=float)
        return -self.rho * t * t + self.tau * t

    def __call__(self, u):
        return np.exp(self.log_t(np.log(u)))

    def derivative(self, u):
        """``g'(u) = g(u) (tau - 2 rho log u) / u``."""
        u = np.asarray(u, dtype=float)
        t = np.log(u)
        return np.exp(self.log_t(t)) * (self.tau - 2.0 * self.rho * t) / u

    def log_ratio(self, t, zeta=ZETA):
        """``log g(u) - log g(zeta u)`` at ``u = exp(t)``."""
        lz = math.log(zeta)
        t = np.asarray(t, dtype=float)
        return self.rho * (2.0 * t * lz + lz * lz) - self.tau * lz


@dataclass(frozen=True)
class KappaFunction:
    """A positive function near the origin whose reciprocal may be integrable.

    Stored as ``log(u / kappa(u))`` in ``t = log u`` so that membership can
    be tested arbitrarily close to zero without cancellation; ``dkappa`` is
    the derivative in ``u``.
    """

    log_u_over_kappa_t: Callable
    dkappa: Callable
    eta: float = 0.1
    name: str = "custom"

    @classmethod
    def log_squared(cls, eta=0.1):
        """``kappa(u) = u (log u)^2``."""
        return cls(lambda t: -2.0 * np.log(np.abs(t)),
                   lambda u: np.log(u) ** 2 + 2.0 * np.log(u), eta, "u (log u)^2")

    @classmethod
    def from_callables(cls, kappa, dkappa, eta=0.1, name="custom"):
        return cls(lambda t: t - np.log(kappa(np.exp(t))), dkappa, eta, name)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return u * np.exp(-self.log_u_over_kappa_t(np.log(u)))

    def membership(self) -> Evidence:
        """Quadrature of ``int_0^eta 1/kappa``.

        With ``u = eta exp(-e^s)`` both ends of the integral decay
        exponentially in ``s`` for logarithmic singularities.
        """
        le = math.log(self.eta)

        def logf(s):
            return self.log_u_over_kappa_t(le - np.exp(s)) + s

        grid = np.linspace(-60.0, 60.0, 1201)
        with np.errstate(all="ignore"):
            vals = np.asarray(logf(grid), dtype=float)
        peak = float(np.nanmax(vals))
        # both ends must have decayed for the substituted integral to converge
        ends = max(float(vals[0]), float(vals[-1]))
        finite = bool(np.isfinite(peak) and ends < peak - 30.0)
        val = log_integrate(logf, -60.0, 60.0) if finite else math.inf
        return Evidence("kappa_membership", finite, math.exp(val) if finite else None,
                        f"int_0^{self.eta:g} du / kappa(u) for kappa = {self.name}",
                        data={"log_end_decay": peak - ends})


# -- certificate ------------------------------------------------------------------

class Verdict(enum.Enum):
    TRACE_CLASS = "TraceClass"
    GEOMETRICALLY_ERGODIC = "GeometricallyErgodic"
    NOT_APPLICABLE = "NotApplicable"
    INCONCLUSIVE = "Inconclusive"


class FailVerdict(enum.Enum):
    HOLDS = "FailHolds"
    REFUTED = "FailRefuted"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Certificate:
    """Verdict plus the named numeric checks behind it.

    ``path`` names the condition that fired: ``"zero_near_origin"``,
    ``"surrogate_monotone"``, ``"nested_integral"``, ``"origin_class"``
    (geometric ergodicity only), ``"fail_integral"`` or ``"none"``.
    """

    verdict: Verdict
    evidence: list
    path: str
    density: dict = field(default_factory=dict)
    dims: dict = field(default_factory=dict)
    trace_bound: float | None = None
    haar: dict | None = None

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a certificate needs at least one evidence entry")

    def to_dict(self):
        out = {
            "verdict": self.verdict.value,
            "path": self.path,
            "density": self.density,
            "dims": self.dims,
            "evidence": [e.as_dict() for e in self.evidence],
        }
        if self.trace_bound is not None:
            out["trace_bound"] = self.trace_bound
        if self.haar is not None:
            out["haar_pxda"] = self.haar
        return out

    def to_text(self):
        lines = [f"verdict: {self.verdict.value}", f"path: {self.path}",
                 f"density: {self.density}", f"dims: {self.dims}"]
        if self.trace_bound is not None:
            lines.append(f"trace bound: {self.trace_bound:.6g}")
        if self.haar is not None:
            lines.append(f"haar px-da: {self.haar.get('status')}")
        lines.append("evidence:")
        for e in self.evidence:
            flag = {True: "pass", False: "fail", None: "n/a"}[e.passed]
            val = "" if e.value is None else f" value={_fmt(e.value)}"
            lines.append(f"  [{flag}] {e.name}{val}  {e.detail}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# -- surrogate monotone ratio -------------------------------------------------------

def check_monotone_ratio(h: MixingDensity, g: SurrogateG, eta: float, *, deep=True) -> Evidence:
    """Is ``h / g`` non-decreasing on ``(0, eta)``?

    The ratio is evaluated in log space on 200 geometric points over
    ``(1e-12, eta)`` and must not drop by more than a relative
    ``1e-10``.  ``deep`` adds 100 points between ``1e-300`` and ``1e-12`` as
    a guard against a ratio that only turns over below the main grid.  When
    ``(rho, tau)`` is the family's own choice and an analytic ``(log h)'``
    exists, the sign of the derivative of the log-ratio is checked as well.
    """
    main = np.log(np.geomspace(1e-12, eta, 200))
    deep_t = np.linspace(-300 * LN10, -12 * LN10, 101)[:-1] if deep else np.empty(0)
    name = "monotone_ratio"
    params = {"rho": g.rho, "tau": g.tau, "eta": eta}
    lh_main = np.asarray(h.log_pdf_t(main), dtype=float)
    zero = np.isneginf(lh_main)
    if zero.all():
        return Evidence(name, True, None, "h vanishes on (0, eta): ratio identically zero", data=params)
    if zero.any():
        # zero on part of (0, eta) and positive elsewhere
        return Evidence(name, None, None, "h vanishes on part of (0, eta) only", data=params)
    lh_deep = np.asarray(h.log_pdf_t(deep_t), dtype=float)
    # below the main grid h may underflow; -inf is allowed only as a prefix
    # (a ratio rising from zero is still non-decreasing)
    under = np.isneginf(lh_deep)
    if under.any() and not under[:int(under.sum())].all():
        return Evidence(name, None, None, "h underflows intermittently below 1e-12", data=params)
    t = np.concatenate([deep_t[~under], main])
    lh = np.concatenate([lh_deep[~under], lh_main])
    lg = g.log_t(t)
    lr = lh - lg
    scale = np.maximum(1.0, np.maximum(np.abs(lh), np.abs(lg)))
    drops = np.diff(lr) / scale[1:]
    worst = float(drops.min())
    ok = worst >= -MONOTONE_SLACK
    data = dict(params, worst_relative_drop=worst, grid_points=int(t.size))
    if ok and h.surrogate_choice() is not None:
        rho0, tau0 = h.surrogate_choice()
        u = np.exp(main)
        with np.errstate(all="ignore"):
            dl = h.dlogpdf(u)
        if dl is not None and math.isclose(rho0, g.rho) and math.isclose(tau0, g.tau):
            dl = np.asarray(dl, dtype=float)
            # d/dt log(h/g) = u (log h)'(u) - (tau - 2 rho t)
            deriv = dl * u - (g.tau - 2.0 * g.rho * main)
            dscale = np.maximum(1.0, np.abs(dl * u))
            data["min_derivative"] = float((deriv / dscale).min())
            ok = bool((deriv >= -MONOTONE_SLACK * dscale).all())
    return Evidence(name, bool(ok), worst, "h/g non-decreasing on the grid" if ok else
                    "h/g decreases somewhere on the grid", data=data)


def search_monotone_ratio(h: MixingDensity, triple=None) -> Evidence:
    """Look for ``(rho, tau, eta)`` making ``h / g_{rho,tau}`` non-decreasing.

    A user-supplied ``triple`` is checked alone.  Otherwise the family's
    analytic choice is tried first, then the fixed grid
    ``rho in {1/4,1/2,1,2,4}``, ``tau in {-8..8}``, ``eta in {1e-1,1e-2,1e-3}``.
    """
    if triple is not None:
        rho, tau, eta = triple
        ev = check_monotone_ratio(h, SurrogateG(rho, tau), eta)
        return Evidence("monotone_ratio_search", ev.passed, None, "user-supplied triple",
                        data={"found": list(triple) if ev.passed else None, "check": ev.as_dict()})
    candidates = []
    choice = h.surrogate_choice()
    if choice is not None:
        candidates += [(choice[0], choice[1], eta) for eta in ETA_GRID]
    candidates += [(r, float(tau), eta) for r in RHO_GRID for tau in TAU_GRID for eta in ETA_GRID]
    tried = 0
    for rho, tau, eta in candidates:
        tried += 1
        ev = check_monotone_ratio(h, SurrogateG(rho, tau), eta)
        if ev.passed:
            return Evidence("monotone_ratio_search", True, None,
                            f"h/g non-decreasing with rho={rho:g}, tau={tau:g}, eta={eta:g}",
                            data={"found": [rho, tau, eta], "tried": tried, "check": ev.as_dict()})
    return Evidence("monotone_ratio_search", False, None, "no triple on the search grid passes",
                    data={"found": None, "tried": tried})


# -- nested integrals near the origin ---------------------------------------------------

class NestedIntegrand:
    """``nu_zeta(u) = u^{d/2} h(u) / int_0^{zeta u} v^{d/2} h(v) dv`` near 0.

    The inner integral is tabulated once (log space, step 0.01 in
    ``log u``) and shared by every ``zeta``.
    """

    def __init__(self, h: MixingDensity, d: int, t_hi: float = 0.0):
        if not h.positive_near_origin:
            raise ValueError("h must be strictly positive near the origin "
                             "(use the zero-near-origin condition instead)")
        self.h = h
        self.d = d
        half = d / 2.0
        self._ell = lambda t: (half + 1.0) * np.asarray(t, dtype=float) + h.log_pdf_t(t)
        self.cum = LogCumulative(self._ell, T_MIN, t_hi + LN2 + 0.05)

    def log_u_nu(self, t, zeta):
        """``log(u nu_zeta(u))`` at ``u = exp(t)``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore"):
            out = self._ell(t) - self.cum(t + math.log(zeta))
        return np.where(np.isnan(out), -np.inf, out)


_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


@dataclass
class NestedIntegralResult:
    status: ShellStatus
    table: ShellTable
    zeta: float
    eta: float

    def as_evidence(self) -> Evidence:
        passed = {ShellStatus.FINITE: True, ShellStatus.DIVERGENT: False}.get(self.status)
        total = float(np.exp(self.table.log_shells[np.isfinite(self.table.log_shells)]).sum())
        return Evidence("nested_integral", passed, total if passed else None,
                        f"nested integral with zeta={self.zeta:g}, eta={self.eta:g}: "
                        f"{self.status.value} ({self.table.reason})",
                        data={"shells": _compact_table(self.table)})


def _compact_table(tab: ShellTable, keep=60):
    d = tab.as_dict()
    for key in ("edges_u", "log_shells", "ratios"):
        if len(d[key]) > keep:
            d[key] = d[key][:keep // 2] + d[key][-keep // 2:]
    d["shell_count"] = len(tab.log_shells)
    return d


def check_nested_integral(h: MixingDensity, d: int, zeta: float = ZETA, eta: float = 0.1, *,
                 nested: NestedIntegrand | None = None) -> NestedIntegralResult:
    """Finiteness of ``int_0^eta nu_zeta(u) du`` via dyadic shells.

    Shell ``k`` covers ``(2^{-k-1} eta, 2^{-k} eta)``.  Shells are added in
    batches (40, 80, ... up to the floating-point floor near ``1e-300``)
    until the shell table is decisive.
    """
    if not 1.0 < zeta < 2.0:
        raise ValueError("zeta must lie in (1, 2)")
    nested = nested or NestedIntegrand(h, d, math.log(eta) + math.log(zeta))
    le = math.log(eta)
    kmax = int((le - T_MIN - 5.0) / LN2)
    edges = le - LN2 * np.arange(kmax + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * LN2
    nodes = mid[:, None] + half * _GL16_X[None, :]
    lv = nested.log_u_nu(nodes.ravel(), zeta).reshape(nodes.shape)
    with np.errstate(divide="ignore"):
        lw = np.log(_GL16_W * half)
    m = lv.max(axis=1, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        ls = np.log(np.exp(lv - safe + lw).sum(axis=1)) + safe[:, 0]
    ls = np.where(np.isfinite(m[:, 0]), ls, -np.inf)
    k = 40
    while True:
        k = min(k, kmax)
        status, reason, ratios = judge_shells(ls[:k])
        if status is not ShellStatus.INCONCLUSIVE or k == kmax:
            break
        k *= 2
    table = ShellTable(edges[:k + 1], ls[:k], ratios, status, reason,
                       params={"zeta": zeta, "eta": eta})
    return NestedIntegralResult(status, table, zeta, eta)


@dataclass
class FailResult:
    verdict: FailVerdict
    u: np.ndarray
    log_phi_nu: np.ndarray
    reason: str

    def as_evidence(self) -> Evidence:
        passed = {FailVerdict.HOLDS: True, FailVerdict.REFUTED: False}.get(self.verdict)
        pick = np.unique(np.r_[0:11, np.arange(10, self.u.size, 10), self.u.size - 1])
        return Evidence("fail_integral", passed, self.verdict.value, self.reason,
                        data={"u": [float(x) for x in self.u[pick]],
                              "log_phi_nu": [float(x) for x in self.log_phi_nu[pick]]})


def check_fail_integral(h: MixingDensity, d: int, *, nested: NestedIntegrand | None = None,
                  run=50) -> FailResult:
    """Trend of ``phi(u) nu_2(u)`` with ``phi(u) = -u log u`` as ``u -> 0``.

    The product is tabulated at ``u = 1e-2, 1e-3, ..., 1e-300``.  Because
    ``1/phi`` is not integrable at the origin, a product that stays bounded
    away from zero forces the fail integral to diverge: a non-decreasing
    trend over the last ``run`` decades gives ``FailHolds``.  A strictly
    decreasing trend ending below ``1e-6`` gives ``FailRefuted``; that
    alone certifies nothing and the nested-integral test decides.
    """
    nested = nested or NestedIntegrand(h, d, math.log(2e-2))
    exps = np.arange(2, 301)
    t = -exps * LN10
    vals = np.log(-t) + nested.log_u_nu(t, 2.0)
    tail = vals[-run:]
    with np.errstate(invalid="ignore"):
        steps = np.diff(tail)
    if np.all(np.isneginf(tail)) or (np.all(np.nan_to_num(steps, nan=-1.0) < 0)
                                    and tail[-1] < math.log(1e-6)):
        verdict, reason = FailVerdict.REFUTED, "phi * nu decreases to zero on the grid"
    elif np.all(np.isfinite(tail)) and np.all(steps >= -1e-9 * np.maximum(1.0, np.abs(tail[1:]))):
        verdict = FailVerdict.HOLDS
        reason = (f"phi * nu non-decreasing over the last {run} decades "
                  f"(>= {math.exp(tail[0]):.4g} down to u=1e-300)")
    else:
        verdict, reason = FailVerdict.INCONCLUSIVE, "no monotone trend in phi * nu"
    return FailResult(verdict, np.exp(t), vals, reason)


# -- zero near the origin ----------------------------------------------------------------

def _zero_origin_eta0(h: MixingDensity) -> float:
    oc = classify_origin(h)
    if oc.kind is not OriginKind.ZERO:
        raise ValueError("h is not zero near the origin")
    return float(oc.eta0)


def log_trace_bound_zero_origin(h: MixingDensity, n, p, d, a) -> tuple[float, dict]:
    """Natural log of the trace bound and its ingredients (``M``, ``J``, ``eta0``)."""
    eta0 = _zero_origin_eta0(h)
    half = d / 2.0
    m = moment_integral(h, half)
    if not m.finite:
        raise ValueError("int u^{d/2} h(u) du must be finite")
    lo, hi = h.t_bounds()
    top = min(math.log(1.5 * eta0), hi)
    log_j = log_integrate(lambda t: h.log_pdf_t(t) + (half + 1.0) * t, max(lo, math.log(eta0)), top)
    if not np.isfinite(log_j):
        raise ValueError("h has no mass on (eta0, 3 eta0 / 2)")
    expo = (n + 2 * a - d - 1) * d / 2.0
    log_bound = expo * LN2 + n * (math.log(m.value) - log_j)
    return log_bound, {"eta0": eta0, "M": m.value, "J": math.exp(log_j), "exponent": expo}


def trace_bound_zero_origin(h: MixingDensity, n, p, d, a) -> float:
    """Upper bound ``2^{(n+2a-d-1)d/2} (M / J)^n`` on the trace of the DA operator.

    ``M = int u^{d/2} h`` and ``J = int_0^{3 eta0/2} u^{d/2} h``.  Returns
    ``inf`` if the bound overflows a float.
    """
    log_bound, _ = log_trace_bound_zero_origin(h, n, p, d, a)
    return math.exp(log_bound) if log_bound < 709.0 else math.inf


# -- Haar PX-DA existence ----------------------------------------------------------------

def check_haar_existence(h: MixingDensity, n, d, a, z=None) -> dict:
    """Moment sufficient condition and, given ``z``, the direct integral.

    The rescaling density ``e(v; z)`` exists when
    ``int t^{n + (d+1-2a)d/2 - 1} prod h(t z_i) dt`` is finite; it suffices
    that ``int u^{(d+1-2a)d/2} h(u) du`` is finite, which is automatic when
    ``a = (d+1)/2``.
    """
    expo = (d + 1 - 2 * a) * d / 2.0
    if expo == 0:
        ha = Evidence("haar_moment", True, None, "exponent (d+1-2a)d/2 is 0: automatic")
    else:
        m = moment_integral(h, expo)
        ha = Evidence("haar_moment", {"finite": True, "divergent": False}.get(m.status.value),
                      m.value, f"int u^{expo:g} h(u) du ({m.status.value})", data=m.as_dict())
    out = {"moment": ha, "direct": None}
    if z is not None:
        try:
            e = HaarDensity(h, np.asarray(z, dtype=float), expo)
            direct = Evidence("haar_direct", True, None, "e(v; z) normalizable for the given z")
            if getattr(e, "log_norm", None) is not None:
                direct.data["log_normalizer"] = e.log_norm
        except SamplerError as exc:
            direct = Evidence("haar_direct", False, None, str(exc))
        out["direct"] = direct
    holds = ha.passed
    if out["direct"] is not None and out["direct"].passed:
        holds = True
    out["holds"] = holds
    return out


# -- surrogate properties ----------------------------------------------------------------

def verify_surrogate_limits(g: SurrogateG, d: int, kappa: KappaFunction | None = None,
                        zeta: float = ZETA) -> Evidence:
    """Tabulate the class-membership quantities of ``g`` on ``u = 1e-2 ... 1e-14``.

    Sequences (ordered towards the origin):

    * ``u^{d/2} g(u)`` -- must be non-increasing towards 0 (bounded and
      non-decreasing in ``u``);
    * ``kappa(u) u^{d/2} g(u)`` -- must decrease towards 0;
    * ``q1 = (kappa' + (d/2) kappa/u) g(u)/g(zeta u)`` and
      ``q2 = kappa g'(u) / g(zeta u)`` -- must decrease towards 0.

    ``passed`` reflects the monotone trends; the values themselves are in
    ``data`` for thresholding by the caller.
    """
    kappa = kappa or KappaFunction.log_squared()
    exps = np.arange(2, 15)
    u = 10.0 ** -exps.astype(float)
    t = np.log(u)
    lg = g.log_t(t)
    ratio = np.exp(g.log_ratio(t, zeta))
    k = kappa(u)
    s0 = np.exp(0.5 * d * t + lg)
    s1 = k * s0
    q1 = (kappa.dkappa(u) + 0.5 * d * k / u) * ratio
    q2 = k * (g.tau - 2.0 * g.rho * t) / u * ratio
    seqs = {"u_d2_g": s0, "kappa_u_d2_g": s1, "q1": q1, "q2": q2}

    def shrinking(x):
        ax = np.abs(x)
        return bool(np.all(np.diff(ax) <= 0))

    checks = {name: shrinking(x) for name, x in seqs.items()}
    passed = all(checks.values())
    data = {"u": u.tolist(), **{name: x.tolist() for name, x in seqs.items()},
            "monotone": checks, "rho": g.rho, "tau": g.tau, "d": d, "zeta": zeta}
    return Evidence("surrogate_limits", passed, None,
                    "all sequences shrink monotonically towards the origin" if passed
                    else "some sequence is not monotone on the grid", data=data)


# -- the cascade ---------------------------------------------------------------------------

def _origin_class_evidence(h, n, p, d, a):
    oc = classify_origin(h)
    bound = (n - p + 2 * a - d - 1) / 2.0
    declared_zero = oc.kind is OriginKind.ZERO and "declared_support" in oc.evidence
    if oc.heuristic and not declared_zero:
        return Evidence("origin_class", None, oc.kind.value,
                        "origin class inferred numerically; not used for geometric ergodicity",
                        data=oc.as_dict())
    if oc.kind in (OriginKind.ZERO, OriginKind.FASTER):
        return Evidence("origin_class", True, oc.kind.value, "zero or faster than polynomial near 0",
                        data=oc.as_dict())
    if oc.kind is OriginKind.POLYNOMIAL:
        ok = oc.power > bound
        return Evidence("origin_class", ok, oc.power,
                        f"polynomial power c={oc.power:g} {'>' if ok else '<='} "
                        f"(n-p+2a-d-1)/2={bound:g}", data=oc.as_dict())
    return Evidence("origin_class", None, oc.kind.value, "origin behaviour unknown", data=oc.as_dict())


def certify(h: MixingDensity, n, p, d, a, *, zeta: float = ZETA, eta: float = 0.1,
            triple=None) -> Certificate:
    """Run the decision cascade and return a :class:`Certificate`.

    1. zero near the origin -> TraceClass with the explicit trace bound;
    2. a monotone ``h / g_{rho,tau}`` -> TraceClass;
    3. finite nested integral -> TraceClass;
    4. the origin-class condition for geometric ergodicity ->
       GeometricallyErgodic (only for classes read off a closed form or a
       declared support, never for a numerically inferred class);
    5. the fail integral diverges -> NotApplicable;
    6. otherwise Inconclusive.
    """
    ev: list[Evidence] = []
    dims = {"n": n, "p": p, "d": d, "a": a}
    s3 = moment_integral(h, d / 2.0)
    ev.append(Evidence("S3", s3.finite, s3.value, f"int u^{d / 2:g} h(u) du ({s3.status.value})"))
    haar = check_haar_existence(h, n, d, a)
    haar_info = {"status": {True: "exists", False: "fails", None: "unknown"}[haar["holds"]],
                 "moment": haar["moment"].as_dict()}

    def done(verdict, path, bound=None):
        if verdict is Verdict.TRACE_CLASS and haar["holds"]:
            haar_info["trace_class"] = True
        return Certificate(verdict, ev, path, h.to_dict(), dims, bound, haar_info)

    oc = classify_origin(h)
    if oc.kind is OriginKind.ZERO and not (oc.heuristic and "declared_support" not in oc.evidence):
        try:
            log_b, parts = log_trace_bound_zero_origin(h, n, p, d, a)
        except ValueError as exc:
            ev.append(Evidence("zero_near_origin", None, None, str(exc)))
        else:
            bound = math.exp(log_b) if log_b < 709.0 else math.inf
            ev.append(Evidence("zero_near_origin", True, oc.eta0,
                               f"h vanishes on (0, {oc.eta0:g})", data=oc.as_dict()))
            ev.append(Evidence("trace_bound", True, bound, "2^{(n+2a-d-1)d/2} (M/J)^n",
                               data=dict(parts, log_bound=log_b)))
            return done(Verdict.TRACE_CLASS, "zero_near_origin", bound)

    c1 = search_monotone_ratio(h, triple)
    ev.append(c1)
    if c1.passed:
        return done(Verdict.TRACE_CLASS, "surrogate_monotone")

    nested = None
    if h.positive_near_origin:
        nested = NestedIntegrand(h, d, max(math.log(eta) + math.log(zeta), math.log(2e-2)))
        l2 = check_nested_integral(h, d, zeta, eta, nested=nested)
        ev.append(l2.as_evidence())
        if l2.status is ShellStatus.FINITE:
            return done(Verdict.TRACE_CLASS, "nested_integral")
    else:
        ev.append(Evidence("nested_integral", None, None, "skipped: h not declared positive near the origin"))

    t1 = _origin_class_evidence(h, n, p, d, a)
    ev.append(t1)
    if t1.passed:
        return done(Verdict.GEOMETRICALLY_ERGODIC, "origin_class")

    if nested is not None:
        fail = check_fail_integral(h, d, nested=nested)
        ev.append(fail.as_evidence())
        if fail.verdict is FailVerdict.HOLDS:
            return done(Verdict.NOT_APPLICABLE, "fail_integral")
    return done(Verdict.INCONCLUSIVE, "none")
