"""Bootstrap particle filter over the stochastic epidemic models.

Particles are propagated with the chain-binomial transition itself, so the
importance weight update reduces to the observation likelihood (a Normal
density on the infected count).  Weights live in log-space; resampling is
triggered when the effective sample size drops below a threshold fraction
of the particle count.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import rng as rng_mod
from .epi import MODEL_COMPARTMENTS, step_stochastic_many

__all__ = [
    "MeasurementSeries",
    "ParticleEnsemble",
    "FilterResult",
    "DegenerateEnsembleError",
    "log_likelihood",
    "ess",
    "resample_indices",
    "resample",
    "filter_step",
    "run_filter",
]

RESAMPLE_MODES = ("multinomial", "residual", "stratified", "systematic")

_LOG_2PI = float(np.log(2.0 * np.pi))


class DegenerateEnsembleError(RuntimeError):
    """All particle weights vanished; the ensemble carries no information."""


@dataclass
class MeasurementSeries:
    """Observed infected counts y_1..y_N aligned to model steps."""

    y: np.ndarray
    sigma: float = 100.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.size == 0:
            raise ValueError("measurement series must be non-empty")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def __len__(self):
        return self.y.size


@dataclass
class ParticleEnsemble:
    """Particle states, log-weights and the per-step likelihood ledger."""

    kind: str
    states: np.ndarray  # (n_p, n_compartments) int64
    log_weights: np.ndarray
    k: int = 0
    measured: str = "I"
    step_scores: list = field(default_factory=list)  # log mean likelihood per step
    ess_trace: list = field(default_factory=list)
    resampled: list = field(default_factory=list)

    @property
    def n_particles(self):
        return self.states.shape[0]

    @property
    def weights(self):
        """Normalized weights (max-subtracted in log-space first)."""
        lw = self.log_weights
        if not np.any(np.isfinite(lw)):
            raise DegenerateEnsembleError("all particle log-weights are -inf")
        w = np.exp(lw - lw.max())
        return w / w.sum()

    def measured_counts(self):
        return self.states[:, MODEL_COMPARTMENTS[self.kind].index(self.measured)]


def make_ensemble(kind, initial, n_p, measured="I"):
    """Fresh ensemble of ``n_p`` copies of the initial state, uniform weights."""
    if n_p < 1:
        raise ValueError(f"n_p must be >= 1, got {n_p}")
    states = np.tile(initial.as_array(), (n_p, 1))
    return ParticleEnsemble(
        kind=kind,
        states=states,
        log_weights=np.zeros(n_p),
        k=initial.k,
        measured=measured,
    )


def log_likelihood(i_count, y_k, sigma):
    """Log Normal density of the residual (i_count - y_k) at scale sigma."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    z = (np.asarray(i_count, dtype=float) - y_k) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * _LOG_2PI


def ess(weights):
    """Effective sample size 1 / sum(w^2) of normalized weights."""
    weights = np.asarray(weights, dtype=float)
    s = float(np.sum(weights**2))
    if s <= 0.0:
        raise DegenerateEnsembleError("cannot compute ESS of all-zero weights")
    return 1.0 / s


def resample_indices(weights, mode, rng):
    """Offspring indices for one resampling pass (expected count N * w_i)."""
    weights = np.asarray(weights, dtype=float)
    n = weights.size
    if mode == "multinomial":
        return rng.choice(n, size=n, p=weights)
    if mode == "residual":
        counts = np.floor(n * weights).astype(np.int64)
        idx = np.repeat(np.arange(n), counts)
        n_rest = n - counts.sum()
        if n_rest > 0:
            resid = n * weights - counts
            resid /= resid.sum()
            idx = np.concatenate([idx, rng.choice(n, size=n_rest, p=resid)])
        return idx
    if mode in ("stratified", "systematic"):
        if mode == "stratified":
            u = (np.arange(n) + rng.uniform(size=n)) / n
        else:
            u = (np.arange(n) + rng.uniform()) / n
        idx = np.searchsorted(np.cumsum(weights), u)
        return np.minimum(idx, n - 1)  # guard float roundoff at the top edge
    raise ValueError(f"unknown resample mode {mode!r}; choose from {RESAMPLE_MODES}")


def resample(ensemble, mode, rng):
    """Resample the ensemble in place; weights reset to uniform."""
    w = ensemble.weights
    if not np.all(np.isfinite(w)):
        raise DegenerateEnsembleError("degenerate weights")
    idx = resample_indices(w, mode, rng)
    ensemble.states = ensemble.states[idx]
    ensemble.log_weights = np.zeros(ensemble.n_particles)
    return ensemble


def filter_step(ensemble, params, y_k, rng, ess_threshold=0.5, mode="systematic",
                sigma=100.0):
    """Advance every particle one step, weight by the likelihood of ``y_k``.

    Returns the step score: the log of the mean per-particle likelihood
    (unnormalized).  Resamples when ESS < ess_threshold * n_p.
    """
    ensemble.states = step_stochastic_many(
        ensemble.kind, ensemble.states, params, ensemble.k, rng
    )
    ensemble.k += 1
    logp = log_likelihood(ensemble.measured_counts(), y_k, sigma)
    score = float(logsumexp(logp) - np.log(ensemble.n_particles))
    ensemble.log_weights = ensemble.log_weights + logp
    n_eff = ess(ensemble.weights)
    did_resample = n_eff < ess_threshold * ensemble.n_particles
    if did_resample:
        resample(ensemble, mode, rng)
    ensemble.step_scores.append(score)
    ensemble.ess_trace.append(n_eff)
    ensemble.resampled.append(did_resample)
    return score


@dataclass
class FilterResult:
    score: float
    step_scores: np.ndarray
    ess_trace: np.ndarray
    resampled: np.ndarray
    ensemble: ParticleEnsemble


def run_filter(
    kind,
    params,
    initial,
    measurements,
    n_p,
    seed,
    mode="systematic",
    ess_threshold=0.5,
    score="average",
    measured="I",
):
    """Score a parameter set with one bootstrap-filter sweep.

    ``score="average"`` (default) is the time-averaged log mean likelihood
    (1/N_t) * sum_k log(mean_i p(y_k | x_k^i)); ``score="logml"`` drops the
    1/N_t factor, the standard log-marginal form.  Deterministic given seed.
    """
    if score not in ("average", "logml"):
        raise ValueError(f"unknown score variant {score!r}")
    ensemble = make_ensemble(kind, initial, n_p, measured=measured)
    gen = rng_mod.substream(seed)
    for y_k in measurements.y:
        filter_step(
            ensemble, params, y_k, gen,
            ess_threshold=ess_threshold, mode=mode, sigma=measurements.sigma,
        )
    steps = np.asarray(ensemble.step_scores)
    total = float(steps.mean()) if score == "average" else float(steps.sum())
    return FilterResult(
        score=total,
        step_scores=steps,
        ess_trace=np.asarray(ensemble.ess_trace),
        resampled=np.asarray(ensemble.resampled),
        ensemble=ensemble,
    )
