"""Centralized reference solvers for acceptance testing and regret baselines.

None of these run inside the distributed protocol; they exist to benchmark
it: the assignment optimum the timers chase each slot, and an exhaustive
small-horizon scheduler showing what a clairvoyant multi-step plan buys.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InstanceTooLargeError
from .network import Allocation

ENUM_GUARD = 10_000_000


def hungarian(weights):
    """Maximum-weight assignment via scipy's linear_sum_assignment.

    Rectangular matrices are handled natively (min(N, M) pairs).
    """
    weights = np.asarray(weights, dtype=float)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return Allocation(pairs=tuple(zip(rows.tolist(), cols.tolist())))


def hungarian_value(weights):
    weights = np.asarray(weights, dtype=float)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def full_matchings(n, m):
    """All maximal matchings of an n x m bipartite instance as pair lists."""
    k = min(n, m)
    if n <= m:
        return [
            tuple(zip(range(n), cols))
            for cols in itertools.permutations(range(m), k)
        ]
    return [
        tuple(zip(rows, range(m)))
        for rows in itertools.permutations(range(n), k)
    ]


def matching_count(n, m):
    k = min(n, m)
    big = max(n, m)
    return math.perm(big, k)


def brute_force_assignment(weights):
    """Exhaustive maximum over all matchings (nonnegative weights assumed,
    so some maximal matching attains the optimum)."""
    weights = np.asarray(weights, dtype=float)
    n, m = weights.shape
    if matching_count(n, m) > ENUM_GUARD:
        raise InstanceTooLargeError(
            f"{matching_count(n, m)} candidate matchings exceed the enumeration guard"
        )
    best_value = -np.inf
    best_pairs = ()
    for pairs in full_matchings(n, m):
        value = sum(weights[i, j] for i, j in pairs)
        if value > best_value:
            best_value = value
            best_pairs = pairs
    return Allocation(pairs=best_pairs), float(best_value)


def _advance_cov(model, p_prev, transmitted, q_i):
    """Expected-covariance recursion for the finite-horizon problem:
    P = delta q Pbar + (1 - delta q) h(P_prev)."""
    hp = model.h(p_prev)
    if not transmitted:
        return hp
    return q_i * model.P_bar + (1.0 - q_i) * hp


def evaluate_schedule(models, ages, q, schedule):
    """Total expected cost sum_k sum_i tr(Gamma_i P_{i,k}) of a single-channel
    schedule (entry = subsystem index or None) under the recursion above."""
    q = np.asarray(q, dtype=float).reshape(len(models))
    covs = [m.h_power(int(t)) for m, t in zip(models, ages)]
    total = 0.0
    for choice in schedule:
        covs = [
            _advance_cov(m, p, choice == i, q[i])
            for i, (m, p) in enumerate(zip(models, covs))
        ]
        total += sum(float(np.trace(m.Gamma @ p)) for m, p in zip(models, covs))
    return total


def myopic_schedule(models, ages, q, horizon):
    """Schedule produced by allocating each slot to argmax coil * q on the
    same deterministic recursion (the one-step rule the timers implement)."""
    q = np.asarray(q, dtype=float).reshape(len(models))
    covs = [m.h_power(int(t)) for m, t in zip(models, ages)]
    schedule = []
    for _ in range(horizon):
        gains = [
            float(np.trace(m.Gamma @ (m.h(p) - m.P_bar))) * q[i]
            for i, (m, p) in enumerate(zip(models, covs))
        ]
        choice = int(np.argmax(gains))
        schedule.append(choice)
        covs = [
            _advance_cov(m, p, choice == i, q[i])
            for i, (m, p) in enumerate(zip(models, covs))
        ]
    return schedule


def miocp_enumerate(models, ages, q, horizon):
    """Exhaustive search over all (N+1)^K single-channel schedules (which
    subsystem transmits each slot, or none), minimizing the summed expected
    cost. Guards: K <= 6, N <= 4."""
    n = len(models)
    if horizon > 6 or n > 4:
        raise InstanceTooLargeError(
            f"(N+1)^K = {(n + 1) ** horizon} schedules; guard is K <= 6, N <= 4"
        )
    best_cost = np.inf
    best_schedule = None
    for schedule in itertools.product([None] + list(range(n)), repeat=horizon):
        cost = evaluate_schedule(models, ages, q, schedule)
        if cost < best_cost:
            best_cost = cost
            best_schedule = schedule
    return list(best_schedule), float(best_cost)
