"""Metropolis / Metropolis-Hastings sampling over model parameters.

Each proposal is scored with one particle-filter sweep (run_filter), giving
a pseudo-marginal random-walk sampler.  The generic ``metropolis`` kernel
also accepts any log-score callable, which is how the kernel itself is
validated against analytic targets.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import rng as rng_mod
from .smc import run_filter

__all__ = [
    "FREE_PARAMS",
    "ProposalSpec",
    "Chain",
    "ChainConfig",
    "propose",
    "accept_ratio",
    "accept_ratio_mh",
    "metropolis",
    "run_chain",
]

# Free parameters sampled per model kind; everything else stays fixed.
FREE_PARAMS = {
    "SIR": ("beta", "alpha"),
    "SEIR": ("beta", "alpha", "gamma"),
    "SEIAR": ("beta", "alpha", "gamma", "mu", "p_frac"),
}

# Parameters with an upper bound in addition to the >= 0 truncation.
_UPPER_BOUNDS = {"p_frac": 1.0}


@dataclass
class ProposalSpec:
    """Independent truncated-Normal random-walk proposal.

    ``stds`` maps parameter name to proposal standard deviation.  Values are
    re-drawn until they land in [lower, upper]; lower is 0 for every
    parameter, upper is 1 for ``p_frac`` and unbounded otherwise.
    """

    stds: dict

    def __post_init__(self):
        for name, s in self.stds.items():
            if s < 0.0:
                raise ValueError(f"proposal std for {name} must be >= 0, got {s}")

    @classmethod
    def relative(cls, theta, fraction=0.1):
        """Stds at ``fraction`` of each parameter's magnitude."""
        return cls({name: fraction * abs(v) for name, v in theta.items()})


def propose(theta, spec, rng, max_tries=1000):
    """Perturb each free parameter independently, truncated to its bounds."""
    out = {}
    for name, value in theta.items():
        std = spec.stds.get(name, 0.0)
        if std == 0.0:
            out[name] = value
            continue
        upper = _UPPER_BOUNDS.get(name, math.inf)
        for _ in range(max_tries):
            draw = value + std * rng.standard_normal()
            if 0.0 <= draw <= upper:
                out[name] = draw
                break
        else:
            raise RuntimeError(f"proposal for {name} failed truncation after {max_tries} tries")
    return out


def accept_ratio(score_new, score_old):
    """Metropolis acceptance probability min(1, exp(score_new - score_old))."""
    if score_new >= score_old:
        return 1.0
    return math.exp(score_new - score_old)


def accept_ratio_mh(score_new, score_old, log_q_forward, log_q_backward):
    """Hastings-corrected acceptance for asymmetric proposals."""
    log_a = (score_new - log_q_forward) - (score_old - log_q_backward)
    return 1.0 if log_a >= 0.0 else math.exp(log_a)


@dataclass
class Chain:
    """Accepted-sample record of one Metropolis run."""

    names: tuple
    samples: np.ndarray  # (iterations + 1, n_params)
    scores: np.ndarray
    accepted: np.ndarray  # bool, entry 0 refers to theta_0

    def __len__(self):
        return self.samples.shape[0]

    @property
    def acceptance_rate(self):
        if len(self) <= 1:
            return 1.0
        return float(self.accepted[1:].mean())

    def theta(self, i):
        return dict(zip(self.names, self.samples[i]))

    def posterior_summary(self, burn_in=0):
        """Per-parameter mean, std and 5/95 quantiles after burn-in."""
        kept = self.samples[burn_in:]
        if kept.size == 0:
            raise ValueError("burn-in leaves an empty chain")
        return {
            name: {
                "mean": float(kept[:, j].mean()),
                "std": float(kept[:, j].std()),
                "p05": float(np.percentile(kept[:, j], 5.0)),
                "p95": float(np.percentile(kept[:, j], 95.0)),
            }
            for j, name in enumerate(self.names)
        }


def metropolis(score_fn, theta0, spec, iterations, seed):
    """Generic Metropolis chain with symmetric truncated-Normal proposals.

    ``score_fn(theta, i)`` returns the log-score of a proposal at iteration
    ``i``.  On rejection the next proposal is centered on the last accepted
    parameters, per the standard random-walk recursion.
    """
    names = tuple(theta0)
    score0 = float(score_fn(dict(theta0), 0))
    if not math.isfinite(score0):
        raise ValueError(f"initial parameters score non-finite ({score0}); "
                         "the chain cannot start")
    gen = rng_mod.substream(seed, 0)
    samples = np.empty((iterations + 1, len(names)))
    scores = np.empty(iterations + 1)
    accepted = np.zeros(iterations + 1, dtype=bool)
    current = dict(theta0)
    current_score = score0
    samples[0] = [current[n] for n in names]
    scores[0] = score0
    accepted[0] = True
    for i in range(1, iterations + 1):
        prop = propose(current, spec, gen)
        s = float(score_fn(prop, i))
        a = accept_ratio(s, current_score)
        if gen.uniform() < a:
            current, current_score = prop, s
            accepted[i] = True
        samples[i] = [current[n] for n in names]
        scores[i] = current_score
    return Chain(names=names, samples=samples, scores=scores, accepted=accepted)


@dataclass
class ChainConfig:
    """Settings for one particle-filter-scored chain."""

    theta0: dict
    iterations: int = 5000
    n_p: int = 100
    seed: int = 0
    proposal_stds: Optional[dict] = None
    ess_threshold: float = 0.5
    resample_mode: str = "systematic"
    score_variant: str = "average"
    measured: str = "I"
    # Debug: score every proposal with the same filter seed, making repeated
    # scores of identical parameters exactly equal.
    pin_filter_seed: bool = False


def run_chain(kind, params, initial, measurements, config):
    """Metropolis chain over the free parameters of ``kind``.

    Every proposal is scored with one run_filter sweep; the filter seed
    advances each iteration unless ``config.pin_filter_seed`` is set.
    """
    free = FREE_PARAMS[kind]
    unknown = set(config.theta0) - set(free)
    if unknown:
        raise ValueError(f"{kind} samples {free}; unknown parameters {sorted(unknown)}")
    spec = ProposalSpec(
        config.proposal_stds
        if config.proposal_stds is not None
        else ProposalSpec.relative(config.theta0).stds
    )

    def score_fn(theta, i):
        trial = replace(params, **theta)
        filter_seed = rng_mod.derive_seed(
            config.seed, 1, 0 if config.pin_filter_seed else i
        )
        return run_filter(
            kind,
            trial,
            initial,
            measurements,
            config.n_p,
            filter_seed,
            mode=config.resample_mode,
            ess_threshold=config.ess_threshold,
            score=config.score_variant,
            measured=config.measured,
        ).score

    return metropolis(score_fn, config.theta0, spec, config.iterations, config.seed)
