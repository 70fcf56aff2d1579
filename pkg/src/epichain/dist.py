"""Count distributions and their overdispersed replacements.

Implements exact PMFs/PDFs, moments and samplers for the Binomial, Poisson,
Gamma, Beta, Negative-Binomial and Beta-Binomial distributions, plus the
``nu``-scaled overdispersion used to replace Poisson and Binomial draws in
the stochastic epidemic steppers:

* Poisson(lam) -> NegBin with r = lam / nu, variance lam * (1 + nu)
* Binomial(n, p) -> BetaBin with gamma = nu / (n - 1),
  variance n * p * (1 - p) * (1 + nu)

All PMFs are evaluated in log-space (log-gamma based) so population-scale
trial counts do not overflow, and exponentiated at the boundary.
"""

import math
import warnings
from dataclasses import dataclass
from functools import singledispatch

import numpy as np
from scipy.special import betaln, gammaln, xlogy

__all__ = [
    "BinomialParams",
    "PoissonParams",
    "GammaParams",
    "BetaParams",
    "NegBinParams",
    "BetaBinParams",
    "binomial_pmf",
    "poisson_pmf",
    "negbin_pmf",
    "betabin_pmf",
    "mean",
    "variance",
    "sample",
    "overdispersed_poisson",
    "overdispersed_binomial",
]

GAMMA_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class BinomialParams:
    """Trial count ``n`` and success probability ``p``."""

    n: int
    p: float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class PoissonParams:
    """Expected event count ``lam``."""

    lam: float

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class GammaParams:
    """Shape ``alpha`` and rate ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError(f"alpha and beta must be > 0, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters ``alpha`` and ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError(f"alpha and beta must be > 0, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class NegBinParams:
    """Mean ``lam`` and failure/dispersion count ``r``.

    Poisson-Gamma mixture with mean ``lam`` and variance
    ``lam * (1 + lam / r)``; ``nu = lam / r`` is the dispersion scale.
    """

    lam: float
    r: float

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.r <= 0.0:
            raise ValueError(f"r must be > 0, got {self.r}")


@dataclass(frozen=True)
class BetaBinParams:
    """Trial count ``n``, mean fraction ``mu`` and dispersion ``gamma``.

    Reparametrized so E[X] = n * mu and
    Var[X] = n * mu * (1 - mu) * (1 + (n - 1) * gamma).
    The underlying Beta shapes are recovered as
    alpha = mu * (1 / gamma - 1), beta = (1 - mu) * (1 / gamma - 1).
    """

    n: int
    mu: float
    gamma: float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {self.mu}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")

    @property
    def alpha(self):
        return self.mu * (1.0 / self.gamma - 1.0)

    @property
    def beta(self):
        return (1.0 - self.mu) * (1.0 / self.gamma - 1.0)


# ---------------------------------------------------------------------------
# PMFs (log-space, exponentiated at the boundary)
# ---------------------------------------------------------------------------

def binomial_pmf(k, params):
    """P(X = k) for X ~ Binomial(n, p)."""
    n, p = params.n, params.p
    if k < 0 or k > n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return float(np.exp(logc + xlogy(k, p) + xlogy(n - k, 1.0 - p)))


def poisson_pmf(k, params):
    """P(X = k) for X ~ Poisson(lam)."""
    lam = params.lam
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return float(np.exp(xlogy(k, lam) - lam - gammaln(k + 1)))


def negbin_pmf(k, params):
    """P(X = k) for the Poisson-Gamma mixture with mean lam and shape r."""
    lam, r = params.lam, params.r
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if lam == 0.0:
        return 1.0 if k == 0 else 0.0
    logp = (
        gammaln(k + r)
        - gammaln(r)
        - gammaln(k + 1)
        + r * math.log(r / (r + lam))
        + k * math.log(lam / (r + lam))
    )
    return float(np.exp(logp))


def betabin_pmf(k, params):
    """P(X = k) for the Beta-Binomial in the (n, mu, gamma) parametrization."""
    n, mu, gamma = params.n, params.mu, params.gamma
    if k < 0 or k > n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if gamma == 0.0:
        return binomial_pmf(k, BinomialParams(n, mu))
    if mu == 0.0:
        return 1.0 if k == 0 else 0.0
    if mu == 1.0:
        return 1.0 if k == n else 0.0
    a, b = params.alpha, params.beta
    logp = (
        gammaln(n + 1)
        - gammaln(k + 1)
        - gammaln(n - k + 1)
        + betaln(k + a, n - k + b)
        - betaln(a, b)
    )
    return float(np.exp(logp))


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

@singledispatch
def mean(params):
    """Analytic mean of the distribution."""
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


@singledispatch
def variance(params):
    """Analytic variance of the distribution."""
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


@mean.register
def _(params: BinomialParams):
    return params.n * params.p


@variance.register
def _(params: BinomialParams):
    return params.n * params.p * (1.0 - params.p)


@mean.register
def _(params: PoissonParams):
    return params.lam


@variance.register
def _(params: PoissonParams):
    return params.lam


@mean.register
def _(params: GammaParams):
    return params.alpha / params.beta


@variance.register
def _(params: GammaParams):
    return params.alpha / params.beta**2


@mean.register
def _(params: BetaParams):
    return params.alpha / (params.alpha + params.beta)


@variance.register
def _(params: BetaParams):
    s = params.alpha + params.beta
    return params.alpha * params.beta / (s * s * (s + 1.0))


@mean.register
def _(params: NegBinParams):
    return params.lam


@variance.register
def _(params: NegBinParams):
    return params.lam * (1.0 + params.lam / params.r)


@mean.register
def _(params: BetaBinParams):
    return params.n * params.mu


@variance.register
def _(params: BetaBinParams):
    n, mu, gamma = params.n, params.mu, params.gamma
    return n * mu * (1.0 - mu) * (1.0 + (n - 1) * gamma)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

@singledispatch
def sample(params, rng, size=None):
    """Draw from the distribution given by ``params`` using stream ``rng``.

    ``size=None`` returns a scalar; otherwise an array of draws.
    Identical (seed, params) always reproduce the same draws.
    """
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


@sample.register
def _(params: BinomialParams, rng, size=None):
    out = rng.binomial(params.n, params.p, size=size)
    return int(out) if size is None else out


@sample.register
def _(params: PoissonParams, rng, size=None):
    out = rng.poisson(params.lam, size=size)
    return int(out) if size is None else out


@sample.register
def _(params: GammaParams, rng, size=None):
    out = rng.gamma(params.alpha, 1.0 / params.beta, size=size)
    return float(out) if size is None else out


@sample.register
def _(params: BetaParams, rng, size=None):
    out = rng.beta(params.alpha, params.beta, size=size)
    return float(out) if size is None else out


@sample.register
def _(params: NegBinParams, rng, size=None):
    lam, r = params.lam, params.r
    if lam == 0.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    out = rng.negative_binomial(r, r / (r + lam), size=size)
    return int(out) if size is None else out


@sample.register
def _(params: BetaBinParams, rng, size=None):
    # Two-stage compose: Beta draw for p, then a Binomial draw, matching the
    # marginalization that defines the distribution.
    n, mu, gamma = params.n, params.mu, params.gamma
    if gamma == 0.0 or mu in (0.0, 1.0):
        out = rng.binomial(n, mu, size=size)
        return int(out) if size is None else out
    p = rng.beta(params.alpha, params.beta, size=size)
    out = rng.binomial(n, p)
    return int(out) if size is None else out


def overdispersed_poisson(lam, nu, rng):
    """Poisson-type draw with variance scaled to lam * (1 + nu).

    ``nu = 0`` is a plain Poisson draw; ``nu > 0`` substitutes a
    Negative-Binomial with r = lam / nu.  Accepts scalar or array ``lam``.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    scalar = np.isscalar(lam)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam < 0.0):
        raise ValueError("lam must be >= 0")
    if nu == 0.0:
        out = rng.poisson(lam)
    else:
        out = np.zeros(lam.shape, dtype=np.int64)
        pos = lam > 0.0
        if np.any(pos):
            out[pos] = rng.negative_binomial(lam[pos] / nu, 1.0 / (1.0 + nu))
    return int(out[0]) if scalar else out


def overdispersed_binomial(n, p, nu, rng):
    """Binomial-type draw with variance scaled to n * p * (1 - p) * (1 + nu).

    ``nu = 0`` or ``n <= 1`` gives a plain Binomial draw; otherwise a
    Beta-Binomial with gamma = nu / (n - 1).  A gamma at or above 1 is
    clamped to 1 - 1e-9 with a warning.  Accepts scalar or array ``n``.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    scalar = np.isscalar(n)
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if np.any(n < 0):
        raise ValueError("n must be >= 0")
    if nu == 0.0 or p in (0.0, 1.0):
        out = rng.binomial(n, p)
    else:
        out = np.zeros(n.shape, dtype=np.int64)
        small = n <= 1
        if np.any(small):
            out[small] = rng.binomial(n[small], p)
        big = ~small
        if np.any(big):
            gamma = nu / (n[big] - 1.0)
            if np.any(gamma >= 1.0):
                warnings.warn(
                    f"dispersion nu={nu} yields gamma >= 1 for some trial counts; "
                    f"clamping to {GAMMA_CLAMP}",
                    RuntimeWarning,
                    stacklevel=2,
                )
                gamma = np.minimum(gamma, GAMMA_CLAMP)
            shape = 1.0 / gamma - 1.0
            p_draw = rng.beta(p * shape, (1.0 - p) * shape)
            out[big] = rng.binomial(n[big], p_draw)
    return int(out[0]) if scalar else out
