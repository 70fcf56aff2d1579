"""Seedable random streams with derivable, independent sub-streams.

All stochastic code in this package draws from ``numpy.random.Generator``
instances created here.  Sub-streams are keyed by integers on top of a root
seed, so a run is reproducible from its seed alone and independent of how
work is scheduled.
"""

import numpy as np

__all__ = ["stream", "substream", "derive_seed"]


def stream(seed):
    """Root generator for a 64-bit unsigned seed."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def substream(seed, *key):
    """Independent generator keyed by ``(seed, *key)``.

    Identical (seed, key) pairs yield identical streams across runs; distinct
    keys yield statistically independent streams.
    """
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    )


def derive_seed(seed, *key):
    """Deterministic 64-bit child seed for ``(seed, *key)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
