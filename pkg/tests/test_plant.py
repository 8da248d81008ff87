import numpy as np
import pytest

from coilsim import mat
from coilsim.plant import (
    PlantState,
    SubsystemModel,
    estimator_update,
    sensor_update,
    step,
)

SQRT5 = np.sqrt(5.0)


@pytest.fixture(scope="module")
def scalar_model():
    return SubsystemModel.from_scalars(2, 1, 1, 1, 1, 1, 1)


def fresh_state(model):
    return PlantState.initial(model)


class TestModelConstruction:
    def test_derived_quantities(self, scalar_model):
        assert scalar_model.P_bar[0, 0] == pytest.approx((1 + SQRT5) / 4, abs=1e-10)
        assert scalar_model.Pi[0, 0] == pytest.approx(2 + SQRT5, abs=1e-10)
        assert scalar_model.Gamma[0, 0] == pytest.approx(7 + 3 * SQRT5, abs=1e-9)
        assert scalar_model.sigma_max_A == pytest.approx(2.0)

    def test_stable_plant_warns(self):
        with pytest.warns(UserWarning, match="spectral radius"):
            SubsystemModel.from_scalars(0.5, 1, 1, 1, 1, 1, 1)

    def test_default_initial_covariance_is_steady_prior(self, scalar_model):
        assert np.allclose(scalar_model.X0, scalar_model.P_bar_prior)


class TestSensorUpdate:
    def test_zero_innovation_keeps_prediction(self, scalar_model):
        x_hat_s = np.array([3.0])
        u = np.array([0.5])
        pred = scalar_model.A @ x_hat_s + scalar_model.B @ u
        y = scalar_model.C @ pred
        out = sensor_update(scalar_model, x_hat_s, y, u)
        assert np.allclose(out, pred)

    def test_scalar_steady_gain(self, scalar_model):
        # prior h(Pbar) = 2 + sqrt5, gain = prior / (prior + 1)
        prior = 2 + SQRT5
        assert scalar_model.K_bar[0, 0] == pytest.approx(prior / (prior + 1), abs=1e-10)
        out = sensor_update(scalar_model, np.zeros(1), np.array([1.0]), np.zeros(1))
        assert out[0] == pytest.approx(prior / (prior + 1), abs=1e-10)

    def test_gain_consistent_with_g_map(self, scalar_model):
        m = scalar_model
        joseph = (np.eye(m.n) - m.K_bar @ m.C) @ m.P_bar_prior
        residual = np.linalg.norm(joseph - mat.g_map(m.C, m.V, m.P_bar_prior))
        assert residual < 1e-9


class TestEstimatorUpdate:
    def test_receipt_resets(self, scalar_model):
        st = fresh_state(scalar_model)
        st.t = 3
        st.P = scalar_model.h_power(3)
        packet = np.array([1.25])
        estimator_update(scalar_model, st, packet)
        assert st.t == 0
        assert np.allclose(st.x_hat, packet)
        assert np.allclose(st.P, scalar_model.P_bar)

    def test_single_miss(self, scalar_model):
        st = fresh_state(scalar_model)
        estimator_update(scalar_model, st, None)
        assert st.t == 1
        assert st.P[0, 0] == pytest.approx(2 + SQRT5, abs=1e-9)

    def test_two_misses(self, scalar_model):
        st = fresh_state(scalar_model)
        estimator_update(scalar_model, st, None)
        estimator_update(scalar_model, st, None)
        assert st.t == 2
        assert st.P[0, 0] == pytest.approx(9 + 4 * SQRT5, abs=1e-9)

    def test_miss_propagates_closed_loop(self, scalar_model):
        st = fresh_state(scalar_model)
        st.x_hat = np.array([2.0])
        estimator_update(scalar_model, st, None)
        assert st.x_hat[0] == pytest.approx(2.0 * scalar_model.A_cl[0, 0])

    def test_covariance_cache_matches_recompute(self, scalar_model):
        rng = np.random.default_rng(3)
        st = fresh_state(scalar_model)
        for _ in range(40):
            if rng.random() < 0.4:
                estimator_update(scalar_model, st, np.zeros(1))
            else:
                estimator_update(scalar_model, st, None)
            assert np.allclose(st.P, scalar_model.h_power(st.t), rtol=1e-12)


class TestStep:
    def test_all_zero_noise_free(self, scalar_model):
        st = fresh_state(scalar_model)
        st.x = np.zeros(1)
        st.x_hat = np.zeros(1)
        st.x_hat_s = np.zeros(1)
        _, cost = step(scalar_model, st, w=np.zeros(1), v=np.zeros(1))
        assert cost == 0.0
        assert np.allclose(st.x, 0.0)

    def test_deterministic_propagation_with_zero_input(self, scalar_model):
        st = fresh_state(scalar_model)
        st.x = np.array([1.5])
        st.x_hat = np.zeros(1)  # forces u = 0
        _, _ = step(scalar_model, st, w=np.zeros(1), v=np.zeros(1))
        assert st.x[0] == pytest.approx(3.0)

    def test_cost_sample_definition(self, scalar_model):
        st = fresh_state(scalar_model)
        st.x = np.array([2.0])
        st.x_hat = np.array([1.0])
        u = scalar_model.L[0, 0] * 1.0
        _, cost = step(scalar_model, st, w=np.zeros(1), v=np.zeros(1))
        assert cost == pytest.approx(4.0 + u * u)

    def test_perfect_communication_mean_cost(self, scalar_model):
        # Per-slot delivery keeps t = 0; the long-run average of the
        # quadratic stage cost must approach tr(Pi W) + tr(Gamma Pbar).
        m = scalar_model
        target = m.tr_PiW + float(np.trace(m.Gamma @ m.P_bar))
        rng = np.random.default_rng(42)
        st = PlantState.initial(m, init_rng=rng, meas_rng=rng)
        horizon = 100_000
        samples = np.empty(horizon)
        for k in range(horizon):
            estimator_update(m, st, st.x_hat_s.copy())
            _, samples[k] = step(m, st, rng=rng)
        batches = samples.reshape(100, -1).mean(axis=1)
        se = batches.std(ddof=1) / np.sqrt(len(batches))
        assert abs(samples.mean() - target) < 3 * se
