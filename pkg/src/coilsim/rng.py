"""Seeded random substreams for reproducible simulation runs.

Every run owns a family of independent streams derived from a single master
seed through ``numpy``'s SeedSequence spawn keys, backed by the counter-based
Philox generator:

    master seed -> (role, subsystem) -> stream

Roles:

    PROCESS_NOISE   per-subsystem process disturbance draws (one block per slot)
    MEASUREMENT     per-subsystem measurement noise draws (one block per slot)
    INITIAL_STATE   per-subsystem initial state draw (consumed once)
    CHANNEL         single stream of link uniforms; one N x M block per slot,
                    so the draw for link (i, j) at slot k sits at a fixed
                    stream position regardless of policy decisions
    EPSILON         per-subsystem index-perturbation draws (one row per slot)
    TIE_BREAK       per-subsystem channel tie-break uniforms (one per slot)
    WARMUP          shuffle of the warm-up transmission order (consumed once)

Streams consume a fixed number of draws per slot, so two policies compared
under the same master seed face identical noise and channel outcomes wherever
their decisions coincide (common random numbers).
"""

import numpy as np

PROCESS_NOISE = 0
MEASUREMENT = 1
INITIAL_STATE = 2
CHANNEL = 3
EPSILON = 4
TIE_BREAK = 5
WARMUP = 6


def substream(master_seed, role, subsystem=None):
    """Return the Generator for (master_seed, role, subsystem)."""
    key = (role,) if subsystem is None else (role, subsystem)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def subsystem_streams(master_seed, role, n_subsystems):
    """One stream per subsystem for the given role."""
    return [substream(master_seed, role, i) for i in range(n_subsystems)]
