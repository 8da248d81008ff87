"""Bernoulli channels and the distributed timer-based contention protocol.

Each contending subsystem runs one countdown timer per channel, set to
lambda / cost. The first timer to expire claims its channel: the winner
flags the channel (instantaneous in this model), withdraws its remaining
timers, and everyone else abandons that channel. The process repeats on the
survivors until channels or subsystems run out. Because flag packets have
negligible duration, the whole contention is simulated in virtual time as a
greedy sweep over timer values; no clocks are involved and the outcome is a
deterministic function of the timer matrix.

Ties are broken by (subsystem index, channel index). Exact ties have measure
zero for continuously distributed costs but do occur in homogeneous
configurations; deterministic tie-breaking keeps runs reproducible.

Note the greedy sweep is not, in general, the maximum-weight assignment for
M > 1 (see the oracle module for the Hungarian reference); the gap is
measured by the acceptance suite rather than assumed away.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AllocationError, ConfigError


def validate_link_quality(q):
    """N x M success probabilities, each in (0, 1]."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.size == 0:
        raise ConfigError(
            f"link quality matrix must be a nonempty 2-d array, got shape {q.shape}",
            field="link_quality",
        )
    if np.any(q <= 0.0) or np.any(q > 1.0) or not np.all(np.isfinite(q)):
        raise ConfigError("link qualities must lie in (0, 1]", field="link_quality")
    return q


@dataclass(frozen=True)
class Allocation:
    """A per-slot subsystem -> channel assignment.

    Each subsystem appears in at most one pair and each channel in at most
    one pair; with all-positive costs the greedy sweep always produces
    min(N, M) pairs.
    """

    pairs: tuple

    def validate(self, n_subsystems, n_channels):
        subs = [i for i, _ in self.pairs]
        chans = [j for _, j in self.pairs]
        if len(set(subs)) != len(subs):
            raise AllocationError(f"subsystem allocated twice: {self.pairs}")
        if len(set(chans)) != len(chans):
            raise AllocationError(f"channel allocated twice: {self.pairs}")
        for i, j in self.pairs:
            if not (0 <= i < n_subsystems and 0 <= j < n_channels):
                raise AllocationError(
                    f"pair ({i}, {j}) out of range for {n_subsystems} subsystems, "
                    f"{n_channels} channels"
                )
        return self

    def channel_of(self, i):
        for s, j in self.pairs:
            if s == i:
                return j
        return None

    def value(self, weights):
        """Sum of weights over the allocated pairs."""
        return float(sum(weights[i, j] for i, j in self.pairs))


@dataclass
class TransmissionOutcome:
    """Per-pair success flags and the per-subsystem delivery indicator."""

    gamma: dict  # (i, j) -> bool for each allocated pair
    theta: np.ndarray  # bool, one entry per subsystem


def compute_timers(costs, lam):
    """Timer matrix lambda / costs. All costs must be strictly positive."""
    costs = np.asarray(costs, dtype=float)
    if lam <= 0:
        raise ConfigError("lambda must be positive", field="lambda")
    if np.any(costs <= 0.0):
        raise AllocationError("timer costs must be strictly positive (see CoIL flooring)")
    return lam / costs


def resolve_contention(tau):
    """Greedy virtual-time sweep over the timer matrix.

    Repeatedly claims the globally smallest timer among still-contending
    (subsystem, channel) pairs, then removes that subsystem's other timers
    and that channel's other contenders. Satisfies both access constraints
    by construction.
    """
    tau = np.asarray(tau, dtype=float)
    n, m = tau.shape
    order = sorted(
        ((tau[i, j], i, j) for i in range(n) for j in range(m)),
        key=lambda e: (e[0], e[1], e[2]),
    )
    taken_subs = set()
    taken_chans = set()
    pairs = []
    for _, i, j in order:
        if i in taken_subs or j in taken_chans:
            continue
        pairs.append((i, j))
        taken_subs.add(i)
        taken_chans.add(j)
        if len(taken_chans) == m or len(taken_subs) == n:
            break
    return Allocation(pairs=tuple(pairs))


def transmit(allocation, q, rng=None, uniforms=None):
    """Draw Bernoulli delivery outcomes for the allocated pairs.

    One uniform is drawn for every link of the N x M matrix each call (in
    row-major order), so the draw consumed by link (i, j) at a given slot
    does not depend on the allocation: two policies compared under the same
    seed face identical channel outcomes wherever their allocations agree.
    """
    q = np.asarray(q, dtype=float)
    if uniforms is None:
        uniforms = rng.random(q.shape)
    gamma = {}
    theta = np.zeros(q.shape[0], dtype=bool)
    for i, j in allocation.pairs:
        success = bool(uniforms[i, j] < q[i, j])
        gamma[(i, j)] = success
        theta[i] = success
    return TransmissionOutcome(gamma=gamma, theta=theta)
