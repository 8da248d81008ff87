"""Cost of information loss: the priority measure driving channel access.

For a subsystem whose last delivery was t slots ago, losing the current
packet too raises the expected stage cost by

    coil(t) = tr(Gamma [h^(t+1)(Pbar) - Pbar])

which is computable from local quantities only. The expected stage cost of a
slot, given the ages carried into it and an allocation F, decomposes as

    sum_i tr(Pi_i W_i) + tr(Gamma_i h^(t_i+1)(Pbar_i))
        - sum_{(i,j) in F} coil_i(t_i) q_{i,j}

so maximizing the allocated sum of coil * q minimizes the expected cost.
"""

import logging

import numpy as np

from .errors import AllocationError, DegeneratePriorityError

log = logging.getLogger(__name__)

COIL_FLOOR = 1e-12  # floor applied before timers divide by the priority


def coil_value(model, t_prev):
    """tr(Gamma [h^(t_prev+1)(Pbar) - Pbar]), from the model's trace cache.

    Strictly positive for an unstable plant with a nonzero cost weight;
    a nonpositive value (Gamma = 0, or no disturbance feeding an
    undisturbed stable mode) is an error because the timers need a nonzero
    priority to divide by.
    """
    value = model.gamma_h_trace(int(t_prev) + 1) - model.gamma_h_trace(0)
    if value <= COIL_FLOOR:
        raise DegeneratePriorityError(
            f"cost of information loss is {value:.3e} at age {t_prev}; "
            "timer priorities must be strictly positive"
        )
    return value


def coil_value_direct(model, t_prev):
    """Same value recomputed from scratch by iterating h (test oracle for
    the incremental cache)."""
    x = model.h_power(int(t_prev) + 1)
    return float(np.trace(model.Gamma @ (x - model.P_bar)))


def coil_vector(models, ages, floor=COIL_FLOOR):
    """Per-subsystem CoIL values with the timer floor applied.

    Unlike coil_value this never raises: degenerate priorities are floored
    at 1e-12 (and logged) so a pathological config degrades to index-order
    tie-breaking instead of dying mid-run.
    """
    out = np.empty(len(models))
    for i, (m, t) in enumerate(zip(models, ages)):
        v = m.gamma_h_trace(int(t) + 1) - m.gamma_h_trace(0)
        if v < floor:
            log.warning("flooring degenerate priority %.3e for subsystem %d", v, i)
            v = floor
        out[i] = v
    return out


def expected_stage_cost(models, ages, allocation, q):
    """Expected stage cost given ages carried into the slot, the allocation,
    and the true link qualities."""
    q = np.asarray(q, dtype=float)
    n, m = q.shape
    allocation.validate(n, m)
    total = 0.0
    for i, model in enumerate(models):
        total += model.tr_PiW + model.gamma_h_trace(int(ages[i]) + 1)
    for (i, j) in allocation.pairs:
        coil_i = models[i].gamma_h_trace(int(ages[i]) + 1) - models[i].gamma_h_trace(0)
        total -= coil_i * q[i, j]
    return total


