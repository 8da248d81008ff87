"""Named benchmark scenarios.

The plant is a two-wheeled balancing robot (segway) discretized at 20 ms:
states are wheel angle, tilt angle and their rates; the input is the DC
motor voltage; the encoder and IMU measure the two angles. It is open-loop
unstable, which is what makes timely sensor delivery matter.
"""

import numpy as np

from .errors import ConfigError

SEGWAY_A = [
    [1.0, 0.0088, 0.0193, 0.0007],
    [0.0, 1.0110, 0.0004, 0.0196],
    [0.0, 0.8788, 0.9280, 0.0729],
    [0.0, 1.1009, 0.0372, 0.9681],
]
SEGWAY_B = [[0.0009], [-0.0006], [0.0925], [-0.0620]]
SEGWAY_C = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]

# 3 subsystems x 2 channels success probabilities of the learning benchmark
TABLE1_Q = [[0.95, 0.81], [0.70, 0.65], [0.80, 0.96]]


def segway_subsystem():
    """Config dict for one segway loop: W = 0.1 I4, V = 0.01 I2, unit state
    weight, R = 0.1."""
    return {
        "A": SEGWAY_A,
        "B": SEGWAY_B,
        "C": SEGWAY_C,
        "W": (0.1 * np.eye(4)).tolist(),
        "V": (0.01 * np.eye(2)).tolist(),
        "Q": np.eye(4).tolist(),
        "R": [[0.1]],
    }


def scalar_subsystem(a=2.0, b=1.0, c=1.0, w=1.0, v=1.0, q=1.0, r=1.0):
    """Scalar shorthand fixture used across the test suite."""
    return {"a": a, "b": b, "c": c, "w": w, "v": v, "q": q, "r": r}


def _stability_preset(q1):
    return {
        "schema_version": 1,
        "subsystems": [segway_subsystem(), segway_subsystem()],
        "link_quality": [[q1], [0.44]],
        "policy": "known-q",
        "horizon": 0,
        "seeds": [0],
        "stability": {"m_bar": 52, "beta": 100.0, "p": 2.0, "t0": 4},
    }


def preset_config(name):
    """Configs for the named scenarios accepted by `coilsim reproduce`."""
    if name == "fig6-stable":
        return _stability_preset(0.40)
    if name == "fig7-unstable":
        return _stability_preset(0.20)
    if name == "table1-learning":
        return {
            "schema_version": 1,
            "subsystems": [segway_subsystem() for _ in range(3)],
            "link_quality": TABLE1_Q,
            "policy": "coil-qhat",
            "horizon": 100_000,
            "seeds": [0, 1, 2],
            "simulate_plant": False,
        }
    if name == "fig5-regret":
        cfg = preset_config("table1-learning")
        cfg["compare_policies"] = ["known-q", "coil-qhat", "qhat-only", "q0-baseline"]
        return cfg
    raise ConfigError(
        f"unknown preset {name!r}; expected one of fig6-stable, fig7-unstable, "
        "table1-learning, fig5-regret",
        field="preset",
    )


PRESET_NAMES = ("fig6-stable", "fig7-unstable", "table1-learning", "fig5-regret")
