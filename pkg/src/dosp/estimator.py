"""Per-node estimation of the global utility from one noisy local observation
plus the neighbor observations that happened to arrive.

The estimator inflates the received sum by 1/q_r, which makes it unbiased for
the realized global utility under per-pair Bernoulli(q_r) reception.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class UtilityObservation:
    """One node's noisy utility observation for the current slot."""

    node: int
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"utility observation for node {self.node} is not finite")


def estimate_global_utility(
    own: UtilityObservation,
    received: Sequence[UtilityObservation],
    q_r: float,
) -> float:
    """Reception-compensated estimate of the slot's global utility.

    Returns own.value + (1 / q_r) * sum of received values.  Historical
    observations are never reused: under i.i.d. environments only the current
    slot's values say anything about the current global utility.
    """
    if not 0.0 < q_r <= 1.0:
        raise ValueError(f"q_r must lie in (0, 1], got {q_r}")
    senders = [obs.node for obs in received]
    if len(set(senders)) != len(senders):
        raise ValueError("duplicate sender in received observations")
    if own.node in senders:
        raise ValueError("a node cannot receive its own observation")
    return own.value + sum(obs.value for obs in received) / q_r


def mc_check_unbiasedness(
    model,
    a_hat: np.ndarray,
    delta: np.ndarray,
    env,
    q_r: float,
    sigma_eta: float,
    n_trials: int,
    rng: np.random.Generator,
    node: int | None = None,
) -> tuple[float, float]:
    """Monte-Carlo bias of the estimator against the true global utility.

    Holds (actions, activity, environment) fixed and resamples only the
    reception sets and the observation noise.  Returns
    (mean(estimate) - f, standard error of the mean).
    """
    delta = np.asarray(delta)
    act = np.flatnonzero(delta)
    if act.size == 0:
        raise ValueError("need at least one active node")
    if node is None:
        node = int(act[0])
    if not delta[node]:
        raise ValueError(f"reference node {node} is inactive")

    if hasattr(model, "utilities_given_channel"):
        u = model.utilities_given_channel(a_hat, delta, env)
    else:
        u = np.asarray(model.local_utilities(a_hat, delta.astype(bool), env))[0]
    f_true = float(u[act].sum())

    others = act[act != node]
    u_own = u[node]
    u_others = u[others]
    estimates = np.full(n_trials, u_own)
    if sigma_eta > 0:
        estimates = estimates + sigma_eta * rng.standard_normal(n_trials)
    if others.size:
        mask = rng.random((n_trials, others.size)) < q_r
        obs = u_others[None, :]
        if sigma_eta > 0:
            obs = obs + sigma_eta * rng.standard_normal((n_trials, others.size))
        estimates = estimates + (mask * obs).sum(axis=1) / q_r
    bias = float(estimates.mean() - f_true)
    stderr = float(estimates.std(ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else 0.0
    return bias, stderr
