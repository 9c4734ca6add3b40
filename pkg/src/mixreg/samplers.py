"""Samplers for the conditionals of the DA and Haar PX-DA chains.

All samplers take a :class:`numpy.random.Generator`; use :class:`RngStream`
to obtain reproducible, independent generators from a ``(seed, stream)``
pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special, stats

from mixreg._quad import T_MAX, T_MIN, judge_shells, log_integrate, log_integrate_piece, ShellStatus
from mixreg.mixing import GIG, Gamma, InvertedGamma, MixingDensity

RETRY_BUDGET = 10_000


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class RngStream:
    """Reproducible generator source: identical ``(seed, stream)`` gives an
    identical draw sequence."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


# -- psi(u; s) -----------------------------------------------------------------

@dataclass(frozen=True)
class PsiDensity:
    """``psi(u; s) = b(s) u^(d/2) exp(-s u / 2) h(u)``."""

    h: MixingDensity
    d: int
    s: float

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError("s must be non-negative")

    def log_kernel_t(self, t):
        """Unnormalized log-density of ``T = log U`` (includes the Jacobian)."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = (self.d / 2.0 + 1.0) * t - 0.5 * self.s * np.exp(t) + self.h.log_pdf_t(t)
        return out

    @property
    def log_normalizer(self) -> float:
        """``log b(s)``."""
        return _psi_log_b(self.h, self.d, float(self.s))

    def logpdf(self, u):
        return logpdf_psi(self, u)

    def conjugate(self):
        """The closed-form law of ``psi`` when one exists, else ``None``.

        Gamma mixing gives a gamma law; inverted gamma and GIG mixing give a
        GIG law ``(v, alpha, gamma)`` in the mixing module's parameterization.
        """
        h, half_d, s = self.h, self.d / 2.0, float(self.s)
        if isinstance(h, Gamma):
            return ("gamma", h.shape + half_d, h.rate + s / 2.0)
        if isinstance(h, InvertedGamma):
            return ("gig", half_d - h.alpha, s, 2.0 * h.gamma)
        if isinstance(h, GIG):
            return ("gig", h.v + half_d, h.alpha + s, h.gamma)
        return None


@lru_cache(maxsize=4096)
def _psi_log_b(h, d, s):
    psi = PsiDensity(h, d, s)
    lo, hi = h.t_bounds()
    val = log_integrate(psi.log_kernel_t, lo, hi, epsrel=1e-13)
    if not np.isfinite(val):
        raise ArithmeticError(f"psi normalizer quadrature failed for {h!r}, d={d}, s={s}")
    return -val


def logpdf_psi(psi: PsiDensity, u):
    """Normalized log-density of ``psi``; ``b(s)`` comes from quadrature."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("u must be positive")
    with np.errstate(divide="ignore"):
        t = np.log(u)
    out = psi.log_kernel_t(t) - t + psi.log_normalizer
    return out if out.ndim else float(out)


def _sample_gig(v, alpha, gamma, rng, size=None):
    """GIG ``b u^(v-1) exp{-(alpha u + gamma/u)/2}``, including the gamma
    (``gamma = 0``) and inverse-gamma (``alpha = 0``) limits."""
    if alpha > 0 and gamma > 0:
        omega = math.sqrt(alpha * gamma)
        return stats.geninvgauss.rvs(v, omega, scale=math.sqrt(gamma / alpha), size=size,
                                     random_state=rng)
    if gamma == 0 and alpha > 0 and v > 0:
        return rng.gamma(v, 2.0 / alpha, size=size)
    if alpha == 0 and gamma > 0 and v < 0:
        return (gamma / 2.0) / rng.gamma(-v, 1.0, size=size)
    raise SamplerError(f"GIG({v}, {alpha}, {gamma}) is not a proper distribution")


def _bisect_decreasing(g, lo, hi, iters=60):
    # root of a decreasing function, elementwise, given g(lo) > 0 > g(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def _gig_batch(p, b, rng: np.random.Generator) -> np.ndarray:
    """One draw from the standard GIG ``x^(p-1) exp{-b (x + 1/x)/2}`` per entry of ``b``.

    Vectorized ratio-of-uniforms with mode shift on ``t = log x``, where the
    density ``exp(p t - b cosh t)`` is log-concave: every bound of the
    enclosing rectangle is the root of a monotone function.
    """
    b = np.asarray(b, dtype=float)
    m = np.arcsinh(p / b)
    ell_m = p * m - b * np.cosh(m)

    def g(t):
        # derivative of log|t - m| + ell(t)/2
        with np.errstate(divide="ignore"):
            return 1.0 / (t - m) + 0.5 * (p - b * np.sinh(t))

    def bound(sign):
        step = np.ones_like(b)
        for _ in range(200):
            far = m + sign * step
            done = sign * g(far) < 0
            if done.all():
                break
            step = np.where(done, step, 2.0 * step)
        near = m + sign * np.finfo(float).eps * np.maximum(1.0, np.abs(m))
        # g decreases on each side of the mode
        lo, hi = (near, far) if sign > 0 else (far, near)
        t = _bisect_decreasing(g, lo, hi)
        # small margin: the bisected argmax is only accurate to rounding
        return (1.0 + 1e-6) * (t - m) * np.exp(0.5 * (p * t - b * np.cosh(t) - ell_m))

    v_hi, v_lo = bound(1.0), bound(-1.0)
    out = np.empty_like(b)
    todo = np.arange(b.size)
    for _ in range(RETRY_BUDGET):
        k = todo.size
        u = rng.uniform(size=k)
        t = m[todo] + (v_lo[todo] + (v_hi[todo] - v_lo[todo]) * rng.uniform(size=k)) / u
        with np.errstate(over="ignore"):
            ell = p * t - b[todo] * np.cosh(t) - ell_m[todo]
        ok = 2.0 * np.log(u) <= ell
        out[todo[ok]] = t[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return np.exp(out)
    raise SamplerError("GIG ratio-of-uniforms exceeded its retry budget")


def sample_psi(psi: PsiDensity, rng: np.random.Generator, size=None):
    """Draw from ``psi(.; s)``.

    Gamma mixing and the GIG-type families use their closed forms; any other
    density goes through ratio-of-uniforms on ``log u``.
    """
    conj = psi.conjugate()
    if conj is not None and conj[0] == "gamma":
        return rng.gamma(conj[1], 1.0 / conj[2], size=size)
    if conj is not None:
        return _sample_gig(*conj[1:], rng, size=size)
    return sample_psi_generic(psi, rng, size=size)


def sample_psi_many(h: MixingDensity, d: int, s, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``psi(.; s_i)`` for each entry of ``s``."""
    s = np.asarray(s, dtype=float)
    if isinstance(h, Gamma):
        return rng.gamma(h.shape + d / 2.0, 1.0 / (h.rate + s / 2.0))
    if isinstance(h, (InvertedGamma, GIG)) and np.all(s > 0):
        # one array call: scipy's per-call overhead dominates otherwise
        _, v, alpha, gamma = PsiDensity(h, d, 1.0).conjugate()
        alpha = alpha - 1.0 + s
        if gamma > 0:
            return np.sqrt(gamma / alpha) * _gig_batch(v, np.sqrt(alpha * gamma), rng)
        return rng.gamma(v, 2.0 / alpha)
    return np.array([sample_psi(PsiDensity(h, d, float(si)), rng) for si in s])


@dataclass(frozen=True)
class _RouBox:
    mode: float
    log_peak: float
    y_lo: float
    y_hi: float


def _maximize(f, a, b):
    res = optimize.minimize_scalar(lambda t: -f(t), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x), float(-res.fun)


@lru_cache(maxsize=512)
def _rou_box(psi: PsiDensity) -> _RouBox:
    lo, hi = psi.h.t_bounds()
    a, b = max(lo, T_MIN), min(hi, T_MAX)
    grid = np.linspace(a, b, 4001)
    vals = np.where(np.isnan(psi.log_kernel_t(grid)), -np.inf, psi.log_kernel_t(grid))
    k = int(np.argmax(vals))
    if not np.isfinite(vals[k]):
        raise SamplerError("psi kernel vanishes on the whole grid")
    step = grid[1] - grid[0]

    def ell(t):
        v = float(psi.log_kernel_t(np.array([t]))[0])
        return v if np.isfinite(v) else -np.inf

    mode, peak = _maximize(ell, max(a, grid[k] - step), min(b, grid[k] + step))
    if peak < vals[k]:
        mode, peak = float(grid[k]), float(vals[k])

    # sup and inf of (t - mode) sqrt(f(t) / f(mode)) on either side of the mode
    with np.errstate(invalid="ignore", over="ignore"):
        g = (grid - mode) * np.exp(0.5 * (vals - peak))
    g = np.where(np.isfinite(g), g, 0.0)

    def side(sign):
        idx = int(np.argmax(sign * g))
        lo_t = max(a, grid[max(idx - 1, 0)])
        hi_t = min(b, grid[min(idx + 1, len(grid) - 1)])
        if sign > 0:
            lo_t = max(lo_t, mode)
        else:
            hi_t = min(hi_t, mode)
        if hi_t <= lo_t:
            return max(sign * g[idx], 0.0)
        _, best = _maximize(lambda t: sign * (t - mode) * math.exp(0.5 * (ell(t) - peak)), lo_t, hi_t)
        return max(best, sign * g[idx], 0.0)

    # 2% slack keeps the box an envelope despite optimizer tolerance
    return _RouBox(mode, peak, -1.02 * side(-1.0), 1.02 * side(1.0))


def sample_psi_generic(psi: PsiDensity, rng: np.random.Generator, size=None):
    """Ratio-of-uniforms on ``T = log U`` relocated to the mode of ``T``."""
    box = _rou_box(psi)
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(n)
    filled = 0
    tries = 0
    while filled < n:
        m = max(2 * (n - filled), 16)
        x = rng.uniform(0.0, 1.0, m)
        yv = rng.uniform(box.y_lo, box.y_hi, m)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = box.mode + yv / x
            ok = 2.0 * np.log(x) <= psi.log_kernel_t(t) - box.log_peak
        ok &= x > 0
        acc = t[ok][: n - filled]
        out[filled:filled + acc.size] = acc
        filled += acc.size
        tries += m
        if tries > RETRY_BUDGET * n:
            raise SamplerError(f"ratio-of-uniforms exceeded retry budget for {psi!r}")
    u = np.exp(out)
    if size is None:
        return float(u[0])
    return u.reshape(size)


# -- e(v; z) -------------------------------------------------------------------

class HaarDensity:
    """Law of the Haar PX-DA rescaling factor ``v``::

        e(v; z) ~ v^(n - 1 + power) prod_i h(v z_i)

    ``power = (d + 1 - 2a) d / 2`` makes ``v z`` follow the marginal law of
    the latent vector; it vanishes when ``a = (d + 1)/2``.

    Raises :class:`SamplerError` when the density cannot be normalized, in
    which case the Haar PX-DA chain does not exist for this ``h`` and ``a``.
    """

    def __init__(self, h: MixingDensity, z, power: float = 0.0):
        self.h = h
        self.z = np.asarray(z, dtype=float)
        self.n = self.z.size
        self.power = float(power)
        self._log_z = np.log(self.z)
        self._table = None
        self.gamma_law = None
        self.gig_law = None
        n, zs, zi = self.n, float(self.z.sum()), float((1.0 / self.z).sum())
        if isinstance(h, Gamma):
            if n * h.shape + self.power <= 0:
                raise SamplerError("Haar PX-DA does not exist: e(v; z) is not normalizable")
            self.gamma_law = (n * h.shape + self.power, h.rate * zs)
        elif isinstance(h, InvertedGamma):
            if n * h.alpha - self.power <= 0:
                raise SamplerError("Haar PX-DA does not exist: e(v; z) is not normalizable")
            self.gig_law = (self.power - n * h.alpha, 0.0, 2.0 * h.gamma * zi)
        elif isinstance(h, GIG):
            self.gig_law = (n * h.v + self.power, h.alpha * zs, h.gamma * zi)
        else:
            self._check_normalizable()

    def log_kernel_t(self, t):
        """Unnormalized log-density of ``log V``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = (self.n + self.power) * t
        for lz in self._log_z:
            out = out + self.h.log_pdf_t(t + lz)
        return out

    def log_unnormalized(self, v):
        v = np.asarray(v, dtype=float)
        return self.log_kernel_t(np.log(v)) - np.log(v)

    def _check_normalizable(self):
        lo, hi = self._t_range()
        for side, sign in (("origin", -1.0), ("tail", 1.0)):
            if (side == "origin" and lo > T_MIN) or (side == "tail" and hi < T_MAX):
                continue
            edges = self._mode_guess() + sign * 2.0 * np.arange(61)
            shells = [log_integrate_piece(self.log_kernel_t, *sorted((edges[k], edges[k + 1])))
                      for k in range(60)]
            status, reason, _ = judge_shells(shells, factor=0.9, run=10)
            if status is ShellStatus.DIVERGENT:
                raise SamplerError(f"Haar PX-DA does not exist: e(v; z) diverges at the {side} ({reason})")
        log_norm = log_integrate(self.log_kernel_t, lo, hi)
        if not np.isfinite(log_norm):
            raise SamplerError("Haar PX-DA does not exist: e(v; z) has no finite normalizer")
        self.log_norm = log_norm

    def _t_range(self):
        # log V must put every v z_i inside the support of h
        lo, hi = self.h.t_bounds()
        return lo - self._log_z.min(), hi - self._log_z.max()

    def _mode_guess(self):
        lo, hi = self._t_range()
        grid = np.linspace(max(lo, T_MIN), min(hi, T_MAX), 2001)
        return float(grid[int(np.argmax(self.log_kernel_t(grid)))])

    def _build_table(self, drop=40.0, nodes=4097):
        lo, hi = self._t_range()
        a, b = max(lo, T_MIN), min(hi, T_MAX)
        coarse = np.linspace(a, b, 4001)
        vals = self.log_kernel_t(coarse)
        peak = vals.max()
        keep = np.nonzero(vals > peak - drop - 10)[0]
        w0 = coarse[max(keep[0] - 1, 0)]
        w1 = coarse[min(keep[-1] + 1, len(coarse) - 1)]
        t = np.linspace(w0, w1, nodes)
        lv = self.log_kernel_t(t)
        # a hard support edge sits exactly on an end node: read the value just inside
        for idx, step in ((0, 1.0), (-1, -1.0)):
            if not np.isfinite(lv[idx]):
                lv[idx] = self.log_kernel_t(t[idx] + step * 1e-9 * (t[1] - t[0]))[0]
        lv = np.where(np.isfinite(lv), lv, peak - 800.0) - peak
        # exact integral of a piecewise log-linear density
        slope = np.diff(lv) / np.diff(t)
        dt = np.diff(t)
        # (e^{lv1} - e^{lv0}) / slope stays finite even across a jump to the support edge
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            cell = np.where(np.abs(slope * dt) > 1e-8,
                            (np.exp(lv[1:]) - np.exp(lv[:-1])) / slope,
                            np.exp(lv[:-1]) * dt)
        cdf = np.concatenate([[0.0], np.cumsum(cell)])
        total = cdf[-1]
        quad_total = math.exp(self.log_norm - peak)
        if abs(total / quad_total - 1.0) > 1e-4:
            raise SamplerError(f"inversion grid mass {total:.8g} disagrees with quadrature {quad_total:.8g}")
        self._table = (t, lv, slope, cdf / total)
        self.grid_mass_ratio = total / quad_total

    def sample(self, rng: np.random.Generator, size=None):
        if self.gamma_law is not None:
            shape, rate = self.gamma_law
            return rng.gamma(shape, 1.0 / rate, size=size)
        if self.gig_law is not None:
            return _sample_gig(*self.gig_law, rng, size=size)
        if self._table is None:
            self._build_table()
        t, lv, slope, cdf = self._table
        u = rng.uniform(size=size)
        k = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(t) - 2)
        # invert the log-linear cell: fraction of cell mass -> position in cell
        mass_k = cdf[k + 1] - cdf[k]
        frac = np.where(mass_k > 0, (u - cdf[k]) / np.where(mass_k > 0, mass_k, 1.0), 0.0)
        dt = t[k + 1] - t[k]
        s = slope[k] * dt
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            # rising cells are inverted from their right end to avoid overflow
            up = 1.0 + np.log(frac + (1.0 - frac) * np.exp(-s)) / s
            down = np.log1p(frac * np.expm1(s)) / s
            x = np.where(np.abs(s) > 1e-8, np.where(s > 0, up, down), frac)
        out = np.exp(t[k] + x * dt)
        return float(out) if size is None else out


def sample_e(e: HaarDensity, rng: np.random.Generator, size=None):
    return e.sample(rng, size=size)


# -- matrix distributions --------------------------------------------------------

def _chol(m, what):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{what} must be symmetric positive definite") from exc


def sample_inverse_wishart(m: float, theta, rng: np.random.Generator) -> np.ndarray:
    """Draw ``W ~ IW_r(m, Theta)``, density ``|w|^-(m+r+1)/2 exp{-tr(Theta^-1 w^-1)/2}``.

    ``W^-1 ~ Wishart(m, Theta)`` is built with the Bartlett decomposition
    ``W^-1 = L A A^T L^T`` and then inverted through the triangular factor.
    """
    theta = np.asarray(theta, dtype=float)
    r = theta.shape[0]
    if not m > r - 1:
        raise ValueError(f"inverse Wishart needs m > r - 1 (m={m}, r={r})")
    L = _chol(theta, "theta")
    return _iw_from_factor(m, L, rng)


def _iw_from_factor(m, L, rng):
    r = L.shape[0]
    A = np.zeros((r, r))
    A[np.diag_indices(r)] = np.sqrt(rng.chisquare(m - np.arange(r)))
    if r > 1:
        A[np.tril_indices(r, -1)] = rng.standard_normal(r * (r - 1) // 2)
    M = L @ A
    Mi = np.linalg.inv(M)
    W = Mi.T @ Mi
    return (W + W.T) / 2


def sample_matrix_normal(theta, A, B, rng: np.random.Generator) -> np.ndarray:
    """``theta + L_A E L_B^T`` with ``E`` standard normal: ``N_{r,c}(theta, A, B)``."""
    theta = np.asarray(theta, dtype=float)
    LA = _chol(np.asarray(A, dtype=float), "A")
    LB = _chol(np.asarray(B, dtype=float), "B")
    E = rng.standard_normal(theta.shape)
    return theta + LA @ E @ LB.T
