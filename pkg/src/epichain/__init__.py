"""Stochastic chain-binomial epidemic models, particle-filter MCMC parameter
inference, and FROLS sparse model identification."""

__version__ = "0.1.0"

from . import dist, epi, mcmc, rng, smc, sysid  # noqa: F401
