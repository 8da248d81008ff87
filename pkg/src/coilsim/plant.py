"""Subsystem dynamics, smart-sensor filter, and controller-side estimator.

Each control loop is a linear plant

    x[k+1] = A x[k] + B u[k] + w[k],    y[k] = C x[k] + v[k]

whose sensor runs a steady-state Kalman filter and transmits the posterior
estimate. The controller-side estimator holds and predicts through dropouts:
after t consecutive misses its estimate is (A + B L)^t applied to the last
received posterior, and its error covariance is h^t(Pbar). The control input
is u = L xhat with the steady-state LQG gain.

Initialization convention: a successful delivery of xbar0 is assumed at slot
-1, so ages start at 0, the controller estimate starts at xbar0, and its
covariance bookkeeping starts at Pbar. When no initial-state covariance is
given, X0 defaults to the steady-state prior h(Pbar), which makes the
steady-gain filter exact from the first slot.
"""

import warnings

import numpy as np

from . import mat
from .errors import DimensionError

COIL_CEILING = 1e250  # saturation for diverging covariance traces


class SubsystemModel:
    """Plant matrices, noise covariances, cost weights, and derived
    steady-state quantities (Pbar, Pi, L, Gamma, Kbar) for one loop."""

    def __init__(self, A, B, C, W, V, Q, R, x0_mean=None, X0=None):
        self.A = mat.as_matrix(A)
        n = self.A.shape[0]
        self.B = mat.as_matrix(B)
        self.C = mat.as_matrix(C)
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise DimensionError(
                f"inconsistent plant dimensions: A{self.A.shape}, B{self.B.shape}, C{self.C.shape}"
            )
        self.W = mat.check_psd(W, "W")
        self.V = mat.check_psd(V, "V")
        self.Q = mat.check_psd(Q, "Q")
        self.R = mat.as_matrix(R)
        if not mat.is_pd(self.V):
            raise DimensionError("V must be positive definite")
        if not mat.is_pd(self.R):
            raise DimensionError("R must be positive definite")
        self.n = n
        self.n_outputs = self.C.shape[0]
        self.n_inputs = self.B.shape[1]

        self.sigma_max_A = mat.spectral_radius(self.A)
        if self.sigma_max_A <= 1.0:
            warnings.warn(
                f"spectral radius of A is {self.sigma_max_A:.4f} <= 1; "
                "the contention analysis assumes open-loop unstable subsystems"
            )

        self.P_bar = mat.steady_state_error_cov(self.A, self.C, self.W, self.V)
        self.P_bar_prior = mat.h_map(self.A, self.W, self.P_bar)
        s = self.C @ self.P_bar_prior @ self.C.T + self.V
        self.K_bar = np.linalg.solve(s.T, (self.P_bar_prior @ self.C.T).T).T
        self.Pi, self.L, self.Gamma = mat.solve_dare(self.A, self.B, self.Q, self.R)
        self.A_cl = self.A + self.B @ self.L
        self.tr_PiW = float(np.trace(self.Pi @ self.W))

        self.x0_mean = (
            np.zeros(n) if x0_mean is None else np.asarray(x0_mean, dtype=float).reshape(n)
        )
        self.X0 = self.P_bar_prior if X0 is None else mat.check_psd(X0, "X0")

        # Lazily grown cache of tr(Gamma h^t(Pbar)); saturates at COIL_CEILING
        # once the covariance trace diverges past it.
        self._gamma_h_trace = [float(np.trace(self.Gamma @ self.P_bar))]
        self._h_frontier = self.P_bar
        self._trace_saturated = False
        # Same ladder for tr(h^t(Pbar)), used by covariance diagnostics.
        self._h_trace = [float(np.trace(self.P_bar))]

    @classmethod
    def from_scalars(cls, a, b, c, w, v, q, r, x0_mean=0.0, X0=None):
        """1x1 shorthand used heavily by tests and configs."""
        return cls(
            [[a]], [[b]], [[c]], [[w]], [[v]], [[q]], [[r]],
            x0_mean=[x0_mean], X0=None if X0 is None else [[X0]],
        )

    def h(self, X):
        return mat.h_map(self.A, self.W, X)

    def h_power(self, t):
        """h^t(Pbar), recomputed from scratch."""
        x = self.P_bar
        for _ in range(int(t)):
            x = self.h(x)
        return x

    def _extend_trace_cache(self, t):
        while len(self._gamma_h_trace) <= t:
            if self._trace_saturated:
                self._gamma_h_trace.append(COIL_CEILING)
                self._h_trace.append(COIL_CEILING)
                continue
            self._h_frontier = self.h(self._h_frontier)
            val = float(np.trace(self.Gamma @ self._h_frontier))
            tr = float(np.trace(self._h_frontier))
            if not np.isfinite(val) or val > COIL_CEILING or tr > COIL_CEILING:
                self._trace_saturated = True
                val, tr = COIL_CEILING, COIL_CEILING
            self._gamma_h_trace.append(val)
            self._h_trace.append(tr)

    def gamma_h_trace(self, t):
        """tr(Gamma h^t(Pbar)), cached."""
        self._extend_trace_cache(t)
        return self._gamma_h_trace[t]

    def h_trace(self, t):
        """tr(h^t(Pbar)), cached."""
        self._extend_trace_cache(t)
        return self._h_trace[t]

    def gamma_h_trace_array(self, t_max):
        """Vectorized view of tr(Gamma h^t(Pbar)) for t in [0, t_max]."""
        self._extend_trace_cache(t_max)
        return np.asarray(self._gamma_h_trace[: t_max + 1])

    def h_trace_array(self, t_max):
        """Vectorized view of tr(h^t(Pbar)) for t in [0, t_max]."""
        self._extend_trace_cache(t_max)
        return np.asarray(self._h_trace[: t_max + 1])


class PlantState:
    """Mutable per-run state of one subsystem.

    Fields: true state x, sensor posterior estimate x_hat_s, controller
    estimate x_hat, age t (slots since last delivery), and the controller
    error covariance P, which always equals h^t(Pbar).
    """

    __slots__ = ("x", "x_hat_s", "x_hat", "t", "P")

    def __init__(self, x, x_hat_s, x_hat, t, P):
        self.x = x
        self.x_hat_s = x_hat_s
        self.x_hat = x_hat
        self.t = t
        self.P = P

    @classmethod
    def initial(cls, model, init_rng=None, meas_rng=None):
        """Draw x0 ~ N(xbar0, X0), take the slot-0 measurement, and start the
        sensor filter with the steady-state gain."""
        if init_rng is None:
            x = model.x0_mean.copy()
        else:
            z = init_rng.standard_normal(model.n)
            x = model.x0_mean + mat._matrix_sqrt(model.X0) @ z
        if meas_rng is None:
            v = np.zeros(model.n_outputs)
        else:
            v = _noise_draw(model.V, meas_rng)
        y = model.C @ x + v
        x_hat_s = model.x0_mean + model.K_bar @ (y - model.C @ model.x0_mean)
        return cls(x=x, x_hat_s=x_hat_s, x_hat=model.x0_mean.copy(), t=0, P=model.P_bar)


def _noise_draw(cov, rng):
    # cov is PSD; cache its square root on the array object is overkill here,
    # callers hot enough to care pre-draw via noise_factor().
    return noise_factor(cov) @ rng.standard_normal(cov.shape[0])


_factor_cache = {}


def noise_factor(cov):
    """Square root factor of a PSD covariance (cached by array identity)."""
    key = id(cov)
    hit = _factor_cache.get(key)
    if hit is not None and hit[0] is cov:
        return hit[1]
    f = mat._matrix_sqrt(cov)
    _factor_cache[key] = (cov, f)
    return f


def sensor_update(model, x_hat_s, y, u):
    """One predict/correct step of the sensor filter with the steady gain."""
    pred = model.A @ x_hat_s + model.B @ u
    return pred + model.K_bar @ (y - model.C @ pred)


def estimator_update(model, state, received):
    """Apply the slot's reception outcome to the controller estimator.

    received is the delivered sensor posterior (theta = 1) or None.
    On receipt: x_hat := received, t := 0, P := Pbar. On a miss: x_hat is
    propagated through the closed-loop matrix, t increments, and P advances
    by one h application (still equal to h^t(Pbar)).
    """
    if received is not None:
        state.x_hat = np.array(received, dtype=float)
        state.t = 0
        state.P = model.P_bar
    else:
        state.x_hat = model.A_cl @ state.x_hat
        state.t += 1
        state.P = model.h(state.P)
    return state


def step(model, state, rng=None, w=None, v=None):
    """Advance one slot after the estimator update: apply u = L x_hat,
    accrue the stage cost sample x'Qx + u'Ru, propagate the plant, and run
    the sensor filter on the new measurement.

    Noise is drawn from rng (process then measurement) unless w / v are
    supplied explicitly.
    """
    u = model.L @ state.x_hat
    cost = float(state.x @ model.Q @ state.x + u @ model.R @ u)
    if w is None:
        w = _noise_draw(model.W, rng) if rng is not None else np.zeros(model.n)
    if v is None:
        v = _noise_draw(model.V, rng) if rng is not None else np.zeros(model.n_outputs)
    state.x = model.A @ state.x + model.B @ u + w
    y = model.C @ state.x + v
    state.x_hat_s = sensor_update(model, state.x_hat_s, y, u)
    return state, cost
