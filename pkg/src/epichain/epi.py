"""Deterministic and chain-binomial stochastic SIR / SEIR / SEIAR models.

Deterministic paths use forward Euler on the continuous right-hand sides;
stochastic paths draw each compartment flow once per step (Poisson-type for
infections, Binomial-type otherwise) with exponential-hazard probabilities
``1 - exp(-rate * dt)``, optionally overdispersed by ``nu``.  Total
population is conserved exactly on every stochastic step.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import rng as rng_mod
from .dist import overdispersed_binomial, overdispersed_poisson

__all__ = [
    "MODEL_COMPARTMENTS",
    "ParamSet",
    "CompartmentState",
    "TrajectoryEnsemble",
    "infection_prob",
    "transition_prob",
    "step_deterministic",
    "step_stochastic",
    "step_stochastic_many",
    "simulate_ensemble",
    "preset",
    "PRESETS",
]

MODEL_COMPARTMENTS = {
    "SIR": ("S", "I", "R"),
    "SEIR": ("S", "E", "I", "R"),
    "SEIAR": ("S", "E", "I", "A", "R"),
}


@dataclass
class ParamSet:
    """Epidemic rates, dispersion and discretization settings.

    Rates are per day; ``contact`` maps physical time to a contact-rate
    multiplier c(t) and defaults to the constant 1.
    """

    beta: float = 0.13
    alpha: float = 0.11
    gamma: float = 0.33
    mu: float = 0.11
    p_frac: float = 0.5
    nu: float = 0.0
    dt: float = 1.0
    n_pop: int = 10000
    contact: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        for name in ("beta", "alpha", "gamma", "mu", "nu"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.p_frac <= 1.0:
            raise ValueError(f"p_frac must be in [0, 1], got {self.p_frac}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_pop < 1:
            raise ValueError(f"n_pop must be >= 1, got {self.n_pop}")

    def contact_at(self, t):
        return 1.0 if self.contact is None else float(self.contact(t))

    @property
    def r0(self):
        """Basic reproduction number beta / alpha."""
        return self.beta / self.alpha


@dataclass
class CompartmentState:
    """Compartment counts for one model at one time index.

    Counts are integers on stochastic paths and reals on deterministic ones.
    Compartments not present in the model kind stay zero.
    """

    kind: str
    S: float = 0
    E: float = 0
    I: float = 0
    A: float = 0
    R: float = 0
    k: int = 0
    clamped: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_COMPARTMENTS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        for name in ("S", "E", "I", "A", "R"):
            if getattr(self, name) < 0:
                raise ValueError(f"compartment {name} must be >= 0")
            if name not in MODEL_COMPARTMENTS[self.kind] and getattr(self, name) != 0:
                raise ValueError(f"compartment {name} unused in {self.kind}")

    @property
    def compartments(self):
        return MODEL_COMPARTMENTS[self.kind]

    def as_array(self, dtype=np.int64):
        return np.array([getattr(self, c) for c in self.compartments], dtype=dtype)

    def total(self):
        return self.S + self.E + self.I + self.A + self.R

    def _with_array(self, x, k, clamped=False):
        vals = dict(zip(self.compartments, x))
        return replace(self, k=k, clamped=clamped, **vals)


@dataclass
class TrajectoryEnsemble:
    """Per-step empirical mean and percentile band over many trajectories."""

    kind: str
    times: np.ndarray
    mean: np.ndarray  # (n_steps + 1, n_compartments)
    p_low: np.ndarray
    p_high: np.ndarray
    n_traj: int
    trajectories: Optional[np.ndarray] = None  # (n_traj, n_steps + 1, n_comp)

    @property
    def compartments(self):
        return MODEL_COMPARTMENTS[self.kind]


def infection_prob(params, infectious_count, t=0.0):
    """Per-susceptible infection probability over one step.

    ``1 - exp(-beta * c(t) * (infectious / n_pop) * dt)``.  SEIAR callers
    pass I + A as the infectious count.
    """
    frac = infectious_count / params.n_pop
    return -np.expm1(-params.beta * params.contact_at(t) * frac * params.dt)


def transition_prob(rate, dt):
    """Exponential-hazard step probability ``1 - exp(-rate * dt)``."""
    if rate < 0.0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    return -np.expm1(-rate * dt)


# ---------------------------------------------------------------------------
# Deterministic stepping
# ---------------------------------------------------------------------------

def _deterministic_flows(kind, x, params, t):
    """Per-edge flow rates at state ``x``; each entry (src, dst, rate)."""
    b, a, g, m, p = params.beta, params.alpha, params.gamma, params.mu, params.p_frac
    c = params.contact_at(t)
    n = params.n_pop
    if kind == "SIR":
        s, i, _ = x
        return [(0, 1, b * c * s * i / n), (1, 2, a * i)]
    if kind == "SEIR":
        s, e, i, _ = x
        return [(0, 1, b * c * s * i / n), (1, 2, g * e), (2, 3, a * i)]
    s, e, i, aa, _ = x
    return [
        (0, 1, b * c * s * (i + aa) / n),
        (1, 2, g * p * e),
        (1, 3, g * (1.0 - p) * e),
        (2, 4, a * i),
        (3, 4, m * aa),
    ]


def step_deterministic(state, params):
    """One forward-Euler step ``x_{k+1} = x_k + dt * f(x_k)``.

    A compartment that would be driven negative has its outflows scaled down
    to the available amount; such steps are flagged via ``clamped``.
    """
    kind = state.kind
    x = state.as_array(dtype=float)
    t = state.k * params.dt
    flows = _deterministic_flows(kind, x, params, t)
    amounts = np.array([params.dt * rate for _, _, rate in flows])
    clamped = False
    # Cap total outflow per source at the current compartment value.
    for src in range(len(x)):
        idx = [j for j, (s, _, _) in enumerate(flows) if s == src]
        if not idx:
            continue
        total = amounts[idx].sum()
        if total > x[src]:
            amounts[idx] *= x[src] / total if total > 0.0 else 0.0
            clamped = True
    out = x.copy()
    for (src, dst, _), amt in zip(flows, amounts):
        out[src] -= amt
        out[dst] += amt
    return state._with_array(out, state.k + 1, clamped=clamped)


# ---------------------------------------------------------------------------
# Stochastic stepping (vectorized over rows)
# ---------------------------------------------------------------------------

def step_stochastic_many(kind, x, params, k, rng):
    """Advance integer states ``x`` (rows = trajectories) by one step.

    Every flow is drawn once and applied to both its source and destination,
    capped at the source compartment, so population is conserved exactly and
    no compartment goes negative.
    """
    nu = params.nu
    t = k * params.dt
    x = x.copy()
    if kind == "SIR":
        s, i = x[:, 0], x[:, 1]
        p_inf = infection_prob(params, i, t)
        new_inf = np.minimum(overdispersed_poisson(s * p_inf, nu, rng), s)
        p_rec = transition_prob(params.alpha, params.dt)
        new_rec = overdispersed_binomial(i, p_rec, nu, rng)
        x[:, 0] -= new_inf
        x[:, 1] += new_inf - new_rec
        x[:, 2] += new_rec
        return x
    if kind == "SEIR":
        s, e, i = x[:, 0], x[:, 1], x[:, 2]
        p_inf = infection_prob(params, i, t)
        new_exp = np.minimum(overdispersed_poisson(s * p_inf, nu, rng), s)
        p_i = transition_prob(params.gamma, params.dt)
        new_inf = overdispersed_binomial(e, p_i, nu, rng)
        p_rec = transition_prob(params.alpha, params.dt)
        new_rec = overdispersed_binomial(i, p_rec, nu, rng)
        x[:, 0] -= new_exp
        x[:, 1] += new_exp - new_inf
        x[:, 2] += new_inf - new_rec
        x[:, 3] += new_rec
        return x
    # SEIAR: the two E departures are drawn as one joint split so their sum
    # can never exceed E.
    s, e, i, a = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    p_inf = infection_prob(params, i + a, t)
    new_exp = np.minimum(overdispersed_poisson(s * p_inf, nu, rng), s)
    p_i = transition_prob(params.p_frac * params.gamma, params.dt)
    p_a = transition_prob((1.0 - params.p_frac) * params.gamma, params.dt)
    p_out = min(p_i + p_a - p_i * p_a, 1.0)
    e_out = overdispersed_binomial(e, p_out, nu, rng)
    ratio = p_i / (p_i + p_a) if p_i + p_a > 0.0 else 0.0
    e_to_i = rng.binomial(e_out, ratio)
    e_to_a = e_out - e_to_i
    i_rec = overdispersed_binomial(i, transition_prob(params.alpha, params.dt), nu, rng)
    a_rec = overdispersed_binomial(a, transition_prob(params.mu, params.dt), nu, rng)
    x[:, 0] -= new_exp
    x[:, 1] += new_exp - e_out
    x[:, 2] += e_to_i - i_rec
    x[:, 3] += e_to_a - a_rec
    x[:, 4] += i_rec + a_rec
    return x


def step_stochastic(state, params, rng):
    """One chain-binomial step for a single integer state."""
    x = state.as_array()[None, :]
    out = step_stochastic_many(state.kind, x, params, state.k, rng)
    return state._with_array([int(v) for v in out[0]], state.k + 1)


# ---------------------------------------------------------------------------
# Ensemble simulation
# ---------------------------------------------------------------------------

def simulate_ensemble(
    kind,
    params,
    initial,
    n_steps,
    n_traj,
    seed,
    percentiles=(5.0, 95.0),
    band="quantile",
    keep_trajectories=False,
):
    """Simulate ``n_traj`` stochastic trajectories and summarize per step.

    ``band="quantile"`` takes the empirical order-statistic percentiles;
    ``band="deviation"`` instead offsets the mean by the one-sided 90th
    percentile of deviations above/below it.  Deterministic given ``seed``.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    if band not in ("quantile", "deviation"):
        raise ValueError(f"unknown band mode {band!r}")
    comps = MODEL_COMPARTMENTS[kind]
    gen = rng_mod.substream(seed)
    x = np.tile(initial.as_array(), (n_traj, 1))
    traj = np.empty((n_traj, n_steps + 1, len(comps)), dtype=np.int64)
    traj[:, 0, :] = x
    for k in range(n_steps):
        x = step_stochastic_many(kind, x, params, initial.k + k, gen)
        traj[:, k + 1, :] = x
    mean = traj.mean(axis=0)
    if band == "quantile":
        p_low = np.percentile(traj, percentiles[0], axis=0)
        p_high = np.percentile(traj, percentiles[1], axis=0)
    else:
        dev = traj - mean[None, :, :]
        width = 100.0 - 2.0 * percentiles[0]  # e.g. 90 for the 5/95 band
        low_dev = np.percentile(np.minimum(dev, 0.0), 100.0 - width, axis=0)
        high_dev = np.percentile(np.maximum(dev, 0.0), width, axis=0)
        p_low = mean + low_dev
        p_high = mean + high_dev
    times = (initial.k + np.arange(n_steps + 1)) * params.dt
    return TrajectoryEnsemble(
        kind=kind,
        times=times,
        mean=mean,
        p_low=p_low,
        p_high=p_high,
        n_traj=n_traj,
        trajectories=traj if keep_trajectories else None,
    )


def simulate_deterministic(kind, params, initial, n_steps):
    """Forward-Euler trajectory as an array of shape (n_steps + 1, n_comp)."""
    state = initial
    out = np.empty((n_steps + 1, len(MODEL_COMPARTMENTS[kind])), dtype=float)
    out[0] = state.as_array(dtype=float)
    for k in range(n_steps):
        state = step_deterministic(state, params)
        out[k + 1] = state.as_array(dtype=float)
    return out


# ---------------------------------------------------------------------------
# Presets (population setups used throughout the docs and tests)
# ---------------------------------------------------------------------------

def _sir(n_pop, s0, i0, **kw):
    return (
        "SIR",
        ParamSet(beta=0.13, alpha=0.11, n_pop=n_pop, **kw),
        CompartmentState("SIR", S=s0, I=i0, R=0),
    )


PRESETS = {
    "sir-table1": lambda: _sir(10000, 9000, 1000),
    "sir-small": lambda: _sir(1000, 900, 100),
    "sir-outbreak": lambda: _sir(10000, 9990, 10),
    "seir-table1": lambda: (
        "SEIR",
        ParamSet(beta=0.13, alpha=0.11, gamma=0.33, n_pop=10000),
        CompartmentState("SEIR", S=9000, E=0, I=1000, R=0),
    ),
    "seiar-table1": lambda: (
        "SEIAR",
        ParamSet(beta=0.13, alpha=0.11, gamma=0.33, mu=0.11, p_frac=0.5, n_pop=10000),
        CompartmentState("SEIAR", S=9000, E=0, I=1000, A=0, R=0),
    ),
}


def preset(name):
    """Return (kind, ParamSet, initial CompartmentState) for a named setup."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
