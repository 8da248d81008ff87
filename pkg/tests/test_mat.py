import warnings

import numpy as np
import pytest
from scipy.linalg import solve_discrete_are

from coilsim import mat
from coilsim.errors import (
    ConvergenceError,
    DimensionError,
    NotStabilizableError,
    SingularMatrixError,
)
from coilsim.presets import SEGWAY_A, SEGWAY_B, SEGWAY_C

SQRT5 = np.sqrt(5.0)
P_BAR_SCALAR = (1.0 + SQRT5) / 4.0          # root of 4P^2 - 2P - 1 = 0
H_PBAR_SCALAR = 2.0 + SQRT5
PI_SCALAR = 2.0 + SQRT5                     # root of Pi^2 - 4Pi - 1 = 0
L_SCALAR = -(1.0 + SQRT5) / 2.0
GAMMA_SCALAR = 7.0 + 3.0 * SQRT5


def segway():
    A = np.array(SEGWAY_A)
    B = np.array(SEGWAY_B)
    C = np.array(SEGWAY_C)
    W = 0.1 * np.eye(4)
    V = 0.01 * np.eye(2)
    return A, B, C, W, V


def random_filter_instance(rng, n_max=4):
    n = rng.integers(1, n_max + 1)
    p = rng.integers(1, n + 1)
    a = rng.standard_normal((n, n))
    a *= rng.uniform(0.3, 2.5) / max(mat.spectral_radius(a), 1e-6)
    c = rng.standard_normal((p, n))
    m = rng.standard_normal((n, n))
    w = m @ m.T + 0.1 * np.eye(n)
    v = np.eye(p) * rng.uniform(0.1, 2.0)
    return a, c, w, v


def random_control_instance(rng, n_max=4):
    n = rng.integers(1, n_max + 1)
    m = rng.integers(1, 3)
    a = rng.standard_normal((n, n))
    a *= rng.uniform(0.3, 2.5) / max(mat.spectral_radius(a), 1e-6)
    b = rng.standard_normal((n, m))
    q = np.eye(n)
    r = np.eye(m)
    return a, b, q, r


def random_psd(rng, n):
    m = rng.standard_normal((n, n))
    return m @ m.T


class TestMaps:
    def test_h_scalar(self):
        assert mat.h_map([[2.0]], [[1.0]], [[1.0]])[0, 0] == pytest.approx(5.0)

    def test_h_zero(self):
        out = mat.h_map([[2.0]], [[0.0]], [[0.0]])
        assert out[0, 0] == 0.0

    def test_h_at_fixed_point(self):
        out = mat.h_map([[2.0]], [[1.0]], [[P_BAR_SCALAR]])
        assert out[0, 0] == pytest.approx(H_PBAR_SCALAR, abs=1e-12)

    def test_g_scalar(self):
        assert mat.g_map([[1.0]], [[1.0]], [[1.0]])[0, 0] == pytest.approx(0.5)

    def test_g_zero(self):
        assert mat.g_map([[1.0]], [[1.0]], [[0.0]])[0, 0] == 0.0

    def test_g_closes_the_fixed_point(self):
        out = mat.g_map([[1.0]], [[1.0]], [[H_PBAR_SCALAR]])
        assert out[0, 0] == pytest.approx(P_BAR_SCALAR, abs=1e-12)

    def test_h_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            mat.h_map(np.eye(2), np.eye(3), np.eye(2))

    def test_g_singular_innovation(self):
        with pytest.raises(SingularMatrixError):
            mat.g_map([[1.0]], [[0.0]], [[0.0]])

    def test_g_contracts_psd_inputs(self):
        rng = np.random.default_rng(11)
        c = np.array([[1.0, 0.0], [0.0, 1.0]])
        v = np.eye(2)
        for _ in range(50):
            x = random_psd(rng, 2)
            out = mat.g_map(c, v, x)
            assert np.linalg.eigvalsh(x - out).min() > -1e-9

    def test_maps_are_monotone(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((3, 3))
        w = random_psd(rng, 3)
        c = rng.standard_normal((2, 3))
        v = np.eye(2)
        for _ in range(50):
            x = random_psd(rng, 3)
            y = x + random_psd(rng, 3)
            dh = mat.h_map(a, w, y) - mat.h_map(a, w, x)
            dg = mat.g_map(c, v, y) - mat.g_map(c, v, x)
            assert np.linalg.eigvalsh(dh).min() > -1e-9
            assert np.linalg.eigvalsh(dg).min() > -1e-9


class TestSteadyStateErrorCov:
    def test_scalar_closed_form(self):
        p = mat.steady_state_error_cov([[2.0]], [[1.0]], [[1.0]], [[1.0]])
        assert p[0, 0] == pytest.approx(P_BAR_SCALAR, abs=1e-10)

    def test_no_disturbance(self):
        with pytest.warns(UserWarning):
            p = mat.steady_state_error_cov([[0.5]], [[1.0]], [[0.0]], [[1.0]])
        assert p[0, 0] == 0.0

    def test_segway_fixed_point(self):
        a, _, c, w, v = segway()
        p = mat.steady_state_error_cov(a, c, w, v)
        residual = np.linalg.norm(mat.g_map(c, v, mat.h_map(a, w, p)) - p, "fro")
        assert residual < 1e-10
        # independent oracle: posterior from the scipy-prior DARE
        prior = solve_discrete_are(a.T, c.T, w, v)
        assert np.allclose(p, mat.g_map(c, v, prior), atol=1e-8)

    def test_segway_regression_trace(self):
        a, _, c, w, v = segway()
        p = mat.steady_state_error_cov(a, c, w, v)
        assert np.trace(p) == pytest.approx(7.3042108169450515, abs=1e-8)

    def test_random_instances_meet_residual(self):
        rng = np.random.default_rng(13)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for _ in range(100):
                a, c, w, v = random_filter_instance(rng)
                p = mat.steady_state_error_cov(a, c, w, v)
                residual = np.linalg.norm(
                    mat.g_map(c, v, mat.h_map(a, w, p)) - p, "fro"
                )
                assert residual < 1e-10 * max(1.0, np.linalg.norm(p, "fro"))


class TestSolveDare:
    def test_scalar_closed_form(self):
        pi, gain, gamma = mat.solve_dare([[2.0]], [[1.0]], [[1.0]], [[1.0]])
        assert pi[0, 0] == pytest.approx(PI_SCALAR, abs=1e-10)
        assert gain[0, 0] == pytest.approx(L_SCALAR, abs=1e-10)
        assert gamma[0, 0] == pytest.approx(GAMMA_SCALAR, abs=1e-9)
        assert 2.0 + gain[0, 0] == pytest.approx((3.0 - SQRT5) / 2.0, abs=1e-10)
        # Gamma = a^2 Pi + Q - Pi for scalars (DARE rearranged)
        assert gamma[0, 0] == pytest.approx(4 * pi[0, 0] + 1 - pi[0, 0], abs=1e-9)

    def test_zero_dynamics(self):
        q = np.diag([2.0, 3.0])
        pi, gain, gamma = mat.solve_dare(np.zeros((2, 2)), np.eye(2), q, np.eye(2))
        assert np.allclose(pi, q)
        assert np.allclose(gain, 0.0)
        assert np.allclose(gamma, 0.0)

    def test_segway(self):
        a, b, _, _, _ = segway()
        q, r = np.eye(4), np.array([[0.1]])
        pi, gain, gamma = mat.solve_dare(a, b, q, r)
        s = b.T @ pi @ b + r
        residual = np.linalg.norm(
            a.T @ pi @ a + q - (a.T @ pi @ b) @ np.linalg.solve(s, b.T @ pi @ a) - pi,
            "fro",
        )
        assert residual < 1e-9
        assert mat.spectral_radius(a + b @ gain) < 1.0
        assert np.allclose(pi, solve_discrete_are(a, b, q, r), atol=1e-7)

    def test_unstabilizable_pair(self):
        with pytest.raises((NotStabilizableError, ConvergenceError)), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mat.solve_dare([[2.0]], [[0.0]], [[1.0]], [[1.0]])

    def test_random_instances_meet_residual(self):
        rng = np.random.default_rng(14)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for _ in range(100):
                a, b, q, r = random_control_instance(rng)
                pi, gain, _ = mat.solve_dare(a, b, q, r)
                s = b.T @ pi @ b + r
                residual = np.linalg.norm(
                    a.T @ pi @ a + q
                    - (a.T @ pi @ b) @ np.linalg.solve(s, b.T @ pi @ a)
                    - pi,
                    "fro",
                )
                assert residual < 1e-9 * max(1.0, np.linalg.norm(pi, "fro"))
                assert mat.spectral_radius(a + b @ gain) < 1.0


class TestSpectral:
    def test_identity(self):
        assert mat.spectral_radius(np.eye(2)) == pytest.approx(1.0)
        assert mat.spectral_norm(np.eye(2)) == pytest.approx(1.0)

    def test_diagonal(self):
        d = np.diag([2.0, 0.5])
        assert mat.spectral_radius(d) == pytest.approx(2.0)
        assert mat.spectral_norm(d) == pytest.approx(2.0)

    def test_segway_is_open_loop_unstable(self):
        a = segway()[0]
        # companion-polynomial oracle, independent of the eig routine
        roots = np.roots(np.poly(a))
        oracle = np.max(np.abs(roots))
        assert oracle > 1.0
        assert mat.spectral_radius(a) == pytest.approx(oracle, abs=1e-8)
        assert mat.spectral_radius(a) > 1.0

    def test_radius_never_exceeds_norm(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            a = rng.standard_normal((rng.integers(1, 5),) * 2)
            assert mat.spectral_radius(a) <= mat.spectral_norm(a) + 1e-12

    def test_requires_square(self):
        with pytest.raises(DimensionError):
            mat.spectral_radius(np.ones((2, 3)))
