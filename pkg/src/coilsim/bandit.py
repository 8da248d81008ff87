"""Per-subsystem learning of unknown link qualities.

Each subsystem treats its M channels as arms of an independent bandit with
binary rewards (1 on delivery, 0 otherwise) and keeps its own counters; no
statistics are shared. The index is UCB1 with a uniformly perturbed play
count in the exploration term,

    qhat_j = rbar_j + sqrt(2 ln z / (z_j + eps_j)),   eps_j ~ U(a, b)

with -1 < a <= b < 1 so the denominator stays positive after the warm-up
guarantee z_j >= 1. The perturbation makes index ties across subsystems a
measure-zero event, which is what lets the indices drive collision-free
timers directly. Counters update only on actual transmissions: contention
losers observe nothing.
"""

import numpy as np

from . import network
from .coil import coil_vector
from .errors import ConfigError, DegeneratePriorityError

EPS_LOW_DEFAULT = -0.5
EPS_HIGH_DEFAULT = 0.5


class BanditState:
    """Play and reward counters of one subsystem over its M channels."""

    def __init__(self, n_channels, eps_low=EPS_LOW_DEFAULT, eps_high=EPS_HIGH_DEFAULT):
        if not (-1.0 < eps_low <= eps_high < 1.0):
            raise ConfigError(
                f"epsilon bounds ({eps_low}, {eps_high}) must satisfy -1 < a <= b < 1",
                field="epsilon_bounds",
            )
        self.n_channels = int(n_channels)
        self.eps_low = float(eps_low)
        self.eps_high = float(eps_high)
        self.plays = np.zeros(self.n_channels, dtype=np.int64)
        self.rewards = np.zeros(self.n_channels, dtype=np.int64)

    @property
    def total_plays(self):
        return int(self.plays.sum())

    def mean_reward(self, j):
        return self.rewards[j] / self.plays[j]

    def draw_epsilon(self, rng):
        """Fresh per-channel perturbations for one slot."""
        return self.eps_low + (self.eps_high - self.eps_low) * rng.random(self.n_channels)


def ucb_index(state, j, epsilon):
    """Perturbed UCB1 index of one arm. Requires the arm to have been played
    at least once (the warm-up contract)."""
    if state.plays[j] == 0:
        raise DegeneratePriorityError(
            f"channel {j} has never been played; run the warm-up schedule first"
        )
    z = state.total_plays
    return float(
        state.rewards[j] / state.plays[j]
        + np.sqrt(2.0 * np.log(z) / (state.plays[j] + epsilon))
    )


def ucb_indices(state, epsilons):
    """All M indices at once (hot-path form of ucb_index)."""
    if np.any(state.plays == 0):
        raise DegeneratePriorityError("warm-up incomplete: some channel never played")
    z = state.total_plays
    return state.rewards / state.plays + np.sqrt(
        2.0 * np.log(z) / (state.plays + epsilons)
    )


def reward_update(state, j, gamma):
    """Record one transmission on channel j with binary outcome gamma."""
    state.plays[j] += 1
    state.rewards[j] += int(gamma)


def warmup_schedule(n_subsystems, n_channels, rng):
    """Round-robin order in which every (subsystem, channel) pair transmits
    exactly once, one pair per slot, in a seeded shuffled sequence. After
    its N*M slots every arm of every subsystem has one play."""
    pairs = [(i, j) for i in range(n_subsystems) for j in range(n_channels)]
    rng.shuffle(pairs)
    return pairs


def algorithm1_step(
    states,
    ages,
    models,
    q,
    lam,
    eps_rngs,
    channel_rng,
    weight_by_coil=True,
    index_override=None,
):
    """One post-warm-up slot of the distributed learning protocol.

    Draws fresh index perturbations, weights the per-channel indices by the
    subsystem's CoIL (unless weight_by_coil is False, giving the
    quality-only variant), resolves contention through the timers, transmits
    over the true channels, and updates the counters of the subsystems that
    actually transmitted. Losers keep their observation history unchanged.

    index_override(i) -> length-M array replaces the learned indices (used
    by equivalence tests to feed the true qualities through the same path).

    Returns (allocation, chosen channel per subsystem with None for losers,
    transmission outcome).
    """
    q = np.asarray(q, dtype=float)
    n, m = q.shape
    indices = np.empty((n, m))
    for i, state in enumerate(states):
        if index_override is not None:
            indices[i] = index_override(i)
        else:
            indices[i] = ucb_indices(state, state.draw_epsilon(eps_rngs[i]))
    if weight_by_coil:
        weights = coil_vector(models, ages)[:, None] * indices
    else:
        weights = indices
    weights = np.maximum(weights, 1e-12)
    tau = network.compute_timers(weights, lam)
    allocation = network.resolve_contention(tau)
    outcome = network.transmit(allocation, q, rng=channel_rng)
    chosen = [None] * n
    for (i, j) in allocation.pairs:
        chosen[i] = j
        reward_update(states[i], j, outcome.gamma[(i, j)])
    return allocation, chosen, outcome
