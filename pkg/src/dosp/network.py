"""Per-slot network randomness: node activity, utility-reception sets,
channel environment, and observation noise.

All samplers are pure functions of an owned :class:`numpy.random.Generator`;
slots within one replication are sequential, replications use disjoint
streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError


@dataclass(frozen=True)
class NetworkConfig:
    """Static network parameters.

    ``q_activity`` is the per-slot probability that a node is active,
    ``q_reception`` the per-ordered-pair probability that one active node's
    utility observation reaches another active node in the same slot.
    """

    n_nodes: int
    q_activity: float
    q_reception: float
    activity: str = "binomial"  # "binomial" | "poisson" (large-N regime, n_k capped at N)
    noise: str = "gaussian"  # "gaussian" | "uniform" observation-noise law

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigError("n_nodes must be >= 1")
        if not 0.0 < self.q_activity <= 1.0:
            raise ConfigError(f"q_activity must lie in (0, 1], got {self.q_activity}")
        if not 0.0 < self.q_reception <= 1.0:
            raise ConfigError(f"q_reception must lie in (0, 1], got {self.q_reception}")
        if self.activity not in ("binomial", "poisson"):
            raise ConfigError(f"unknown activity model {self.activity!r}")
        if self.noise not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown noise model {self.noise!r}")

    @property
    def expected_active(self) -> float:
        """Mean number of active nodes per slot (n_nodes * q_activity)."""
        return self.n_nodes * self.q_activity


@dataclass(frozen=True)
class ChannelSpec:
    """Per-link fading statistics for the interference channel.

    ``fading='real_gaussian'`` draws a real zero-mean Gaussian amplitude h with
    the configured variance and uses the power gain s = h**2;
    ``'complex_gaussian'`` uses the Rayleigh-fading equivalent, s ~ Exp(mean=var).
    Both give E[s_ij] = var, so mean-level behaviour is identical.
    """

    var_direct: float = 1.0
    var_cross: float = 0.1
    noise_floor: float = 0.2
    fading: str = "real_gaussian"

    def __post_init__(self):
        if min(self.var_direct, self.var_cross, self.noise_floor) <= 0:
            raise ConfigError("channel variances and noise floor must be positive")
        if self.fading not in ("real_gaussian", "complex_gaussian"):
            raise ConfigError(f"unknown fading model {self.fading!r}")


@dataclass(frozen=True)
class SlotOutcome:
    """One time-slot's realized randomness."""

    activity: np.ndarray  # (N,) 0/1
    n_active: int
    channel: np.ndarray  # (N, N) nonnegative gains
    obs_noise: np.ndarray  # (N,)
    reception: dict[int, np.ndarray]  # active node -> senders received from


def sample_activity(cfg: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw the 0/1 activity vector for one slot."""
    if cfg.activity == "binomial":
        return (rng.random(cfg.n_nodes) < cfg.q_activity).astype(np.int8)
    # Poisson large-N regime: n_k ~ Poisson(lambda) capped at N, nodes uniform.
    n = min(int(rng.poisson(cfg.expected_active)), cfg.n_nodes)
    out = np.zeros(cfg.n_nodes, dtype=np.int8)
    if n:
        out[rng.choice(cfg.n_nodes, size=n, replace=False)] = 1
    return out


def sample_reception(active_set, node_i: int, q_r: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of active nodes whose observation reached ``node_i`` this slot.

    Each active j != node_i is included independently with probability q_r.
    Inactive nodes receive nothing, so ``node_i`` must be active.
    """
    active_set = np.asarray(active_set, dtype=int)
    if node_i not in active_set:
        raise ValueError(f"node {node_i} is inactive and cannot receive")
    others = active_set[active_set != node_i]
    if others.size == 0:
        return others
    keep = rng.random(others.size) < q_r
    return others[keep]


def _gains(shape, var, fading, rng):
    if fading == "real_gaussian":
        h = rng.standard_normal(shape)
        return var * h * h
    return rng.exponential(var, size=shape)


def sample_channel(n_nodes: int, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Fresh i.i.d. power-gain matrix; entry (i, j) is transmitter i -> receiver j."""
    s = _gains((n_nodes, n_nodes), spec.var_cross, spec.fading, rng)
    diag = _gains(n_nodes, spec.var_direct, spec.fading, rng)
    np.fill_diagonal(s, diag)
    # An exactly-zero direct gain is a probability-zero draw but would produce
    # -inf utilities; resample those entries.
    while True:
        zero = np.flatnonzero(np.diag(s) == 0.0)
        if zero.size == 0:
            return s
        s[zero, zero] = _gains(zero.size, spec.var_direct, spec.fading, rng)


def sample_obs_noise(sigma_eta: float, size, rng: np.random.Generator, kind: str = "gaussian") -> np.ndarray:
    """Zero-mean observation noise with variance sigma_eta**2."""
    if sigma_eta < 0:
        raise ValueError("sigma_eta must be >= 0")
    if sigma_eta == 0:
        return np.zeros(size)
    if kind == "gaussian":
        return sigma_eta * rng.standard_normal(size)
    half = sigma_eta * np.sqrt(3.0)
    return rng.uniform(-half, half, size=size)


def sample_slot(
    cfg: NetworkConfig,
    chspec: ChannelSpec,
    sigma_eta: float,
    rngs: dict[str, np.random.Generator],
) -> SlotOutcome:
    """Compose one full slot draw (activity, channel, noise, reception sets)."""
    activity = sample_activity(cfg, rngs["activity"])
    active = np.flatnonzero(activity)
    channel = sample_channel(cfg.n_nodes, chspec, rngs["channel"])
    noise = sample_obs_noise(sigma_eta, cfg.n_nodes, rngs["noise"], cfg.noise)
    reception = {
        int(i): sample_reception(active, int(i), cfg.q_reception, rngs["reception"])
        for i in active
    }
    return SlotOutcome(
        activity=activity,
        n_active=int(activity.sum()),
        channel=channel,
        obs_noise=noise,
        reception=reception,
    )
