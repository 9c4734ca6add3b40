"""Log-space quadrature on the scale ``t = log u``.

Every integral in this package is of the form ``int_0^inf F(u) du`` with the
pathology concentrated at ``u -> 0`` or ``u -> inf``.  After the substitution
``u = exp(t)`` the integrand becomes ``exp(ell(t))`` with ``ell`` a smooth
function on the real line, and everything can be carried out in log space.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

T_MIN = -700.0
T_MAX = 700.0
LN10 = math.log(10.0)
LN2 = math.log(2.0)

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _eval(logf, t):
    with np.errstate(all="ignore"):
        v = np.asarray(logf(np.asarray(t, dtype=float)), dtype=float)
    return np.where(np.isnan(v), -np.inf, v)


def _scalar(logf, t):
    return float(_eval(logf, np.array([t]))[0])


def log_integrate(logf, lo=-np.inf, hi=np.inf, *, n_grid=4001, drop=60.0,
                  epsrel=1e-12, _depth=0):
    """Return ``log int_lo^hi exp(logf(t)) dt``.

    ``logf`` must accept a float array.  The range is clipped to
    ``[T_MIN, T_MAX]``; the integrand is assumed negligible outside the
    window where it is within ``drop`` e-foldings of its maximum.
    """
    a = max(float(lo), T_MIN)
    b = min(float(hi), T_MAX)
    if not b > a:
        return -np.inf
    grid = np.linspace(a, b, n_grid)
    vals = _eval(logf, grid)
    if not np.isfinite(vals).any():
        return -np.inf
    k = int(np.argmax(vals))
    peak = float(vals[k])
    t_peak = float(grid[k])
    # an integrand still large where an infinite range was clipped has leaked mass
    if (lo < T_MIN and vals[0] > peak - drop) or (hi > T_MAX and vals[-1] > peak - drop):
        return np.inf
    lo_k, hi_k = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    res = optimize.minimize_scalar(lambda t: -_scalar(logf, t), bounds=(lo_k, hi_k),
                                   method="bounded", options={"xatol": 1e-12})
    if np.isfinite(res.fun) and -res.fun > peak:
        peak, t_peak = float(-res.fun), float(res.x)

    keep = np.nonzero(vals > peak - drop)[0]
    i0 = max(int(keep[0]) - 1, 0)
    i1 = min(int(keep[-1]) + 1, n_grid - 1)
    w0, w1 = float(grid[i0]), float(grid[i1])
    if i1 - i0 < 40 and _depth < 3 and (w1 - w0) < (b - a):
        # window resolved by only a few cells: zoom in
        return log_integrate(logf, w0, w1, n_grid=n_grid, drop=drop,
                             epsrel=epsrel, _depth=_depth + 1)

    inner = vals[i0 + 1:i1]
    is_max = (inner >= vals[i0:i1 - 1]) & (inner >= vals[i0 + 2:i1 + 1]) & (inner > peak - drop)
    points = sorted({t_peak, *grid[i0 + 1:i1][is_max][:48].tolist()})
    points = [p for p in points if w0 < p < w1]

    def f(t):
        return math.exp(min(_scalar(logf, t) - peak, 700.0))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _err = integrate.quad(f, w0, w1, points=points or None, limit=1000,
                                   epsabs=1e-300, epsrel=epsrel)
    if val <= 0.0:
        return -np.inf
    return peak + math.log(val)


def log_integrate_piece(logf, lo, hi, *, n_grid=129):
    """``log int_lo^hi exp(logf)`` for a bounded piece, referenced to its own maximum."""
    grid = np.linspace(lo, hi, n_grid)
    vals = _eval(logf, grid)
    m = float(vals.max())
    if not np.isfinite(m):
        return -np.inf
    if m == np.inf:
        return np.inf

    def f(t):
        return math.exp(min(_scalar(logf, t) - m, 700.0))

    k = int(np.argmax(vals))
    pts = [float(grid[k])] if 0 < k < n_grid - 1 else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, lo, hi, points=pts, limit=200, epsabs=1e-300, epsrel=1e-10)
    return m + math.log(val) if val > 0 else -np.inf


class ShellStatus(enum.Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ShellTable:
    """Partial integrals over successive shells approaching a singular end."""

    edges: np.ndarray
    log_shells: np.ndarray
    ratios: np.ndarray
    status: ShellStatus
    reason: str
    params: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "edges_u": [float(math.exp(e)) if e > T_MIN else 0.0 for e in self.edges],
            "log_shells": [float(x) for x in self.log_shells],
            "ratios": [float(x) for x in self.ratios],
            "status": self.status.value,
            "reason": self.reason,
            **self.params,
        }


def shell_ratios(log_shells):
    """Successive ratios ``S_{k+1}/S_k``; a vanished pair counts as full decay."""
    ls = np.asarray(log_shells, dtype=float)
    with np.errstate(invalid="ignore"):
        r = np.exp(ls[1:] - ls[:-1])
    r = np.where(np.isneginf(ls[1:]), 0.0, r)
    return np.where(np.isnan(r), 0.0, r)


def judge_shells(log_shells, *, factor=0.9, run=10, tail_tol=1e-8, sure=0.999):
    """Decide convergence of ``sum_k S_k`` from its trailing ratios.

    Finite: trailing ratios bounded by ``q < 1`` and the geometric tail
    bound ``S_K q / (1 - q)`` is below ``tail_tol`` of the accumulated sum.
    Divergent: the last ``run`` ratios all stay at or above ``factor``
    without accelerating decay, and the last one has reached ``sure``.
    A plateau strictly between ``factor`` and ``sure`` is a slowly
    convergent geometric series as often as a divergent one, so it stays
    undecided until more shells are added.
    """
    ls = np.asarray(log_shells, dtype=float)
    r = shell_ratios(ls)
    if len(r) < run:
        return ShellStatus.INCONCLUSIVE, "too few shells", r
    last = r[-run:]
    finite = ls[np.isfinite(ls)]
    if finite.size == 0:
        return ShellStatus.FINITE, "all shells vanish", r
    ref = finite.max()
    total = float(np.exp(finite - ref).sum())
    q = float(last.max())
    if q < 1.0:
        tail = math.exp(ls[-1] - ref) * q / (1.0 - q) if np.isfinite(ls[-1]) else 0.0
        if tail < tail_tol * total:
            return ShellStatus.FINITE, f"geometric decay q={q:.4g}, tail/sum={tail / total:.3g}", r
    if (last >= factor).all() and last[-1] >= last[0] - 1e-3 and last[-1] >= sure:
        return ShellStatus.DIVERGENT, f"ratios stay >= {factor} (last={last[-1]:.6g})", r
    return ShellStatus.INCONCLUSIVE, f"undecided (last ratio {last[-1]:.6g})", r


class LogCumulative:
    """``log int_{-inf}^t exp(ell(s)) ds`` tabulated on a uniform grid.

    Each cell is integrated by 8-point Gauss-Legendre in log space.  The mass
    left of the first node is closed off with a log-linear extrapolation of
    ``ell``, which is exact for power-law behaviour at the origin.
    """

    def __init__(self, ell, t_lo, t_hi, step=0.01, anchor=None):
        if anchor is not None:
            # place nodes on anchor + j*step
            j0 = math.floor((t_lo - anchor) / step)
            j1 = math.ceil((t_hi - anchor) / step)
            t = anchor + step * np.arange(j0, j1 + 1)
        else:
            n = max(int(math.ceil((t_hi - t_lo) / step)), 1)
            t = t_lo + step * np.arange(n + 1)
        self.t = t
        self.step = step
        half = step / 2.0
        nodes = (t[:-1, None] + half * (_GL8_X[None, :] + 1.0)).ravel()
        lv = _eval(ell, nodes).reshape(len(t) - 1, 8)
        seg = logsumexp(lv + np.log(_GL8_W * half)[None, :], axis=1)

        e0, e1 = _eval(ell, np.array([t[0], t[0] + 1e-3]))
        slope = (e1 - e0) / 1e-3 if np.isfinite(e0) and np.isfinite(e1) else np.inf
        if not np.isfinite(e0):
            head = -np.inf
        elif slope <= 0:
            raise ValueError("integrand does not vanish at the origin; integral diverges")
        else:
            head = e0 - math.log(slope)
        self.log_cum = np.logaddexp.accumulate(np.concatenate([[head], seg]))
        self.ell = ell

    def __call__(self, t):
        return np.interp(t, self.t, self.log_cum)
