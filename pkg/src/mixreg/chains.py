"""DA and Haar PX-DA Markov chains for scale-mixture regression."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from mixreg.mixing import Gamma, MixingDensity
from mixreg.model import ChainState, RegressionData, _residuals, _weighted_stats, ols_state
from mixreg.samplers import HaarDensity, RngStream, SamplerError, _iw_from_factor, sample_psi_many

ALGORITHMS = ("da", "pxda")


class ChainError(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class ChainConfig:
    algorithm: str = "da"
    iterations: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    initial: ChainState | None = None
    keep_latent: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations (empty retained window)")

    @property
    def retained(self):
        return (self.iterations - self.burn_in) // self.thin

    def digest(self):
        payload = {k: v for k, v in asdict(self).items() if k != "initial"}
        if self.initial is not None:
            payload["initial"] = [self.initial.beta.tolist(), self.initial.sigma.tolist()]
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ChainOutput:
    beta: np.ndarray            # (N, p, d)
    sigma: np.ndarray           # (N, d, d)
    latent: np.ndarray | None   # (N, n) when recorded
    iterations: np.ndarray      # 1-based iteration index of each retained draw
    metadata: dict = field(default_factory=dict)
    failure: str | None = None

    def __len__(self):
        return self.beta.shape[0]

    def states(self):
        return [ChainState._trusted(b, s) for b, s in zip(self.beta, self.sigma)]


class _Kernel:
    """Per-run precomputation shared by every transition."""

    def __init__(self, data: RegressionData, h: MixingDensity, algorithm: str):
        self.X, self.y = data.X, data.y
        self.n, self.p, self.d = data.n, data.p, data.d
        self.h = h
        self.m = data.iw_degrees
        if not self.m > self.d - 1:
            raise ValueError(f"inverse Wishart degrees n-p+2a-d-1={self.m:g} must exceed d-1")
        self.haar_power = data.haar_power
        self.algorithm = algorithm
        self._gamma = isinstance(h, Gamma)

    def latent(self, beta, sigma, rng):
        r = _residuals(beta, sigma, self.X, self.y)
        if self._gamma:
            h = self.h
            return rng.gamma(h.shape + self.d / 2.0, 1.0 / (h.rate + r / 2.0))
        return sample_psi_many(self.h, self.d, r, rng)

    def rescale(self, z, rng):
        return HaarDensity(self.h, z, self.haar_power).sample(rng)

    def params(self, z, rng):
        return draw_params(z, self.X, self.y, self.m, rng)

    def step(self, beta, sigma, rng, force_v=None):
        z = self.latent(beta, sigma, rng)
        if self.algorithm == "pxda":
            v = self.rescale(z, rng) if force_v is None else force_v
            z = v * z
        beta, sigma = self.params(z, rng)
        return beta, sigma, z


def draw_params(z, X, y, m, rng: np.random.Generator):
    """Draw ``(beta, Sigma)`` given the latent scales.

    ``Sigma ~ IW(m, S^-1)`` with ``S`` the weighted residual scale, then
    ``beta ~ N(mu, Omega, Sigma)``.
    """
    st = _weighted_stats(z, X, y)
    # with S = C C^T, Sigma^-1 = C^-T A A^T C^-1 for a Bartlett factor A
    C = np.linalg.cholesky(st.scale)
    Li = np.linalg.inv(C).T
    sigma = _iw_from_factor(m, Li, rng)
    LA = np.linalg.cholesky(st.omega)
    LB = np.linalg.cholesky(sigma)
    beta = st.mu + LA @ rng.standard_normal(st.mu.shape) @ LB.T
    return beta, sigma


def da_iterate(state: ChainState, data: RegressionData, h: MixingDensity,
               rng: np.random.Generator):
    """One DA transition: latent scales, then ``Sigma``, then ``beta``."""
    k = _Kernel(data, h, "da")
    beta, sigma, z = k.step(state.beta, state.sigma, rng)
    return ChainState._trusted(beta, sigma), z


def haar_pxda_iterate(state: ChainState, data: RegressionData, h: MixingDensity,
                      rng: np.random.Generator, *, force_v: float | None = None):
    """One Haar PX-DA transition.

    ``force_v`` replaces the draw of the rescaling factor (testing hook);
    ``force_v=1`` makes the transition identical to :func:`da_iterate`.
    """
    k = _Kernel(data, h, "pxda")
    beta, sigma, z = k.step(state.beta, state.sigma, rng, force_v=force_v)
    return ChainState._trusted(beta, sigma), z


def run_chain(config: ChainConfig, data: RegressionData, h: MixingDensity) -> ChainOutput:
    """Run burn-in plus retained iterations, keeping every ``thin``-th draw.

    A sampler failure mid-run returns the draws collected so far together
    with a failure record instead of raising.
    """
    kernel = _Kernel(data, h, config.algorithm)
    state = config.initial if config.initial is not None else ols_state(data)
    rng = RngStream(config.seed).generator()
    N = config.retained
    betas = np.empty((N, data.p, data.d))
    sigmas = np.empty((N, data.d, data.d))
    latent = np.empty((N, data.n)) if config.keep_latent else None
    its = np.empty(N, dtype=np.int64)
    beta, sigma = state.beta, state.sigma
    j = 0
    failure = None
    t0 = time.perf_counter()
    for it in range(1, config.iterations + 1):
        try:
            beta, sigma, z = kernel.step(beta, sigma, rng)
        except (SamplerError, np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
            failure = str(ChainError(str(exc), it))
            break
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            betas[j] = beta
            sigmas[j] = sigma
            its[j] = it
            if latent is not None:
                latent[j] = z
            j += 1
    meta = {
        "algorithm": config.algorithm,
        "seed": config.seed,
        "config_hash": config.digest(),
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "wall_time_s": time.perf_counter() - t0,
    }
    return ChainOutput(betas[:j], sigmas[:j], None if latent is None else latent[:j], its[:j],
                       meta, failure)


# -- Monte Carlo error -----------------------------------------------------------

def batch_means_se(x, batch_len: int | None = None) -> float:
    """Batch-means standard error of the mean of ``x`` (batch length floor(sqrt(N)))."""
    x = np.asarray(x, dtype=float)
    N = x.size
    b = batch_len or int(math.isqrt(N))
    nb = N // b
    if nb < 2:
        return math.nan
    means = x[: nb * b].reshape(nb, b).mean(axis=1)
    return float(math.sqrt(b * means.var(ddof=1) / N))


def summarize(x) -> dict:
    """Mean, SD and their batch-means standard errors for a scalar trace."""
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    dev2 = (x - mean) ** 2
    var = float(dev2.mean())
    sd = math.sqrt(var)
    se_var = batch_means_se(dev2)
    return {
        "mean": mean,
        "sd": sd,
        "mcse_mean": batch_means_se(x),
        "mcse_sd": se_var / (2 * sd) if sd > 0 else math.nan,
    }
