import warnings

import numpy as np
import pytest

from coilsim import network
from coilsim.errors import InstanceTooLargeError
from coilsim.oracle import (
    brute_force_assignment,
    evaluate_schedule,
    hungarian,
    hungarian_value,
    miocp_enumerate,
    myopic_schedule,
)
from coilsim.plant import SubsystemModel


@pytest.fixture(scope="module")
def scalar_models():
    return [
        SubsystemModel.from_scalars(2.0, 1, 1, 1, 1, 1, 1),
        SubsystemModel.from_scalars(1.6, 1, 1, 1, 1, 1, 1),
        SubsystemModel.from_scalars(1.3, 1, 1, 1, 1, 1, 1),
    ]


class TestHungarian:
    def test_diagonal_dominant(self):
        alloc = hungarian(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert set(alloc.pairs) == {(0, 0), (1, 1)}
        assert hungarian_value(np.array([[2.0, 1.0], [1.0, 2.0]])) == 4.0

    def test_degenerate_ties_assert_value_only(self):
        assert hungarian_value(np.ones((2, 2))) == pytest.approx(2.0)

    def test_rectangular(self):
        value = hungarian_value(np.array([[3.0, 1.0], [2.0, 5.0], [4.0, 4.0]]))
        assert value == pytest.approx(9.0)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = rng.integers(1, 6)
            m = rng.integers(1, 5)
            weights = rng.uniform(0.0, 10.0, size=(n, m))
            _, bf_value = brute_force_assignment(weights)
            assert hungarian_value(weights) == pytest.approx(bf_value, abs=1e-9)

    def test_dominates_greedy_contention(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            weights = rng.uniform(0.05, 5.0, size=(4, 3))
            greedy = network.resolve_contention(network.compute_timers(weights, 1.0))
            assert hungarian_value(weights) >= greedy.value(weights) - 1e-12


class TestBruteForce:
    def test_one_by_one(self):
        alloc, value = brute_force_assignment(np.array([[3.5]]))
        assert alloc.pairs == ((0, 0),) and value == 3.5

    def test_two_by_one(self):
        alloc, value = brute_force_assignment(np.array([[3.0], [5.0]]))
        assert alloc.pairs == ((1, 0),) and value == 5.0

    def test_guard(self):
        with pytest.raises(InstanceTooLargeError):
            brute_force_assignment(np.ones((12, 12)))


class TestMiocp:
    def test_horizon_one_equals_stage_argmax(self, scalar_models):
        q = np.array([0.4, 0.7, 0.9])
        ages = [2, 1, 0]
        schedule, _ = miocp_enumerate(scalar_models, ages, q, horizon=1)
        gains = [
            float(np.trace(m.Gamma @ (m.h_power(t + 1) - m.P_bar))) * q[i]
            for i, (m, t) in enumerate(zip(scalar_models, ages))
        ]
        assert schedule == [int(np.argmax(gains))]

    def test_single_subsystem_always_transmits(self, scalar_models):
        schedule, _ = miocp_enumerate(scalar_models[:1], [0], np.array([0.6]), horizon=4)
        assert schedule == [0, 0, 0, 0]

    def test_enumeration_beats_myopic(self, scalar_models):
        q = np.array([0.5, 0.6, 0.9])
        ages = [3, 1, 0]
        horizon = 5
        _, best = miocp_enumerate(scalar_models, ages, q, horizon)
        myopic = myopic_schedule(scalar_models, ages, q, horizon)
        myopic_cost = evaluate_schedule(scalar_models, ages, q, myopic)
        assert best <= myopic_cost + 1e-9

    def test_optimum_schedule_cost_is_consistent(self, scalar_models):
        q = np.array([0.5, 0.6, 0.9])
        schedule, best = miocp_enumerate(scalar_models, [1, 1, 1], q, horizon=3)
        assert evaluate_schedule(scalar_models, [1, 1, 1], q, schedule) == pytest.approx(best)

    def test_guard(self, scalar_models):
        with pytest.raises(InstanceTooLargeError):
            miocp_enumerate(scalar_models, [0, 0, 0], np.array([0.5, 0.5, 0.5]), horizon=7)
