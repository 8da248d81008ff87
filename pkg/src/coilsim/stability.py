"""Mean-square stability certification via the truncated age Markov chain.

Under a deterministic access rule and memoryless channels, the vector of
packet ages (t_1, ..., t_N) is a Markov chain: each slot the rule picks a
winner from the current ages, the winner's age resets on success (prob q_i)
or everyone's age grows by one on failure. Truncating ages at m_bar with a
saturating boundary (a miss at age m_bar stays at m_bar) keeps the chain
exactly row stochastic; the stationary vector then gives per-subsystem age
marginals mu_i(t).

A subsystem's estimator covariance after t misses is h^t(Pbar), which grows
like sigma_max(A)^(2t), so boundedness of the expected covariance comes down
to how fast mu_i(t) decays against that growth. The certifier checks the
series s(t) = mu_i(t) * sigma_max(A)^(2t) against a p-series envelope
beta / t^p on [t0, m_bar] and requires s to be nonincreasing on
[t0, m_bar - 1]; the final truncated state is excluded from the monotonicity
check because it aggregates the entire tail mass. The rougher series
mu_i(t) * ||A^t||^2 is computed alongside for diagnostics; its non-normal
transient makes it unsuitable as the pass/fail series.

Only the single-channel case is certified (the multi-channel protocol is
evaluated by simulation instead).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import mat
from .errors import ConvergenceError, DimensionError, InstanceTooLargeError

STATE_GUARD = 200_000
MAX_SUBSYSTEMS = 3
DENSE_GUARD = 3000
PI_RESIDUAL_TOL = 1e-10
ROW_SUM_TOL = 1e-12
CROSS_CHECK_TOL = 1e-8


def timer_winner_rule(models, q):
    """The deterministic access rule the timers implement: the subsystem
    with the largest coil(age) * q wins; ties go to the lowest index."""
    q = np.asarray(q, dtype=float).reshape(len(models))

    def winner(ages):
        best_i = 0
        best_w = -np.inf
        for i, (m, t) in enumerate(zip(models, ages)):
            w = (m.gamma_h_trace(int(t) + 1) - m.gamma_h_trace(0)) * q[i]
            if w > best_w:
                best_w = w
                best_i = i
        return best_i

    return winner


@dataclass
class ChainModel:
    """Truncated age chain: state list, transition matrix, stationary vector."""

    n_subsystems: int
    m_bar: int
    states: list
    index: dict
    transition: sp.csr_matrix
    actions: np.ndarray  # winner per state
    pi: np.ndarray = None
    pi_power: np.ndarray = None  # power-iteration cross-check when available
    _coords: np.ndarray = field(default=None, repr=False)


def build_chain(models, q, m_bar, policy=None):
    """Enumerate the truncated age chain induced by a deterministic winner
    rule over a single shared channel.

    q holds the per-subsystem success probabilities (shape (N,) or (N, 1)).
    The all-zero age tuple is excluded for N >= 2: with fewer channels than
    subsystems it is reachable only at startup.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    n = len(models)
    if len(q) != n:
        raise DimensionError(f"{n} models but {len(q)} success probabilities")
    if n > MAX_SUBSYSTEMS:
        raise InstanceTooLargeError(f"chain certification supports N <= {MAX_SUBSYSTEMS}")
    n_states_full = (m_bar + 1) ** n
    if n_states_full > STATE_GUARD:
        raise InstanceTooLargeError(
            f"(m_bar + 1)^N = {n_states_full} states exceeds the guard {STATE_GUARD}"
        )
    if policy is None:
        policy = timer_winner_rule(models, q)

    exclude_origin = n > 1
    states = [
        ages
        for ages in np.ndindex(*([m_bar + 1] * n))
        if not (exclude_origin and not any(ages))
    ]
    index = {s: r for r, s in enumerate(states)}
    rows, cols, vals = [], [], []
    actions = np.empty(len(states), dtype=np.int64)
    for r, ages in enumerate(states):
        w = int(policy(ages))
        actions[r] = w
        grown = tuple(min(t + 1, m_bar) for t in ages)
        success = tuple(0 if i == w else grown[i] for i in range(n))
        rows.append(r)
        cols.append(index[success])
        vals.append(q[w])
        rows.append(r)
        cols.append(index[grown])
        vals.append(1.0 - q[w])
    transition = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(states), len(states))
    )
    transition.sum_duplicates()
    row_sums = np.asarray(transition.sum(axis=1)).ravel()
    if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
        raise ConvergenceError("transition matrix is not row stochastic")
    return ChainModel(
        n_subsystems=n,
        m_bar=m_bar,
        states=states,
        index=index,
        transition=transition,
        actions=actions,
        _coords=np.array(states, dtype=np.int64),
    )


def stationary_vector_dense(transition):
    """Closed form pi = 1^T (T - I + D)^-1 with D the all-ones matrix."""
    t = np.asarray(
        transition.toarray() if sp.issparse(transition) else transition, dtype=float
    )
    s = t.shape[0]
    system = (t - np.eye(s) + np.ones((s, s))).T
    pi = np.linalg.solve(system, np.ones(s))
    return pi


def stationary_vector_power(transition, tol=1e-13, max_iter=500_000):
    """Left-eigenvector power iteration on the (sparse) transition matrix."""
    t_left = (transition.T if sp.issparse(transition) else np.asarray(transition).T)
    if sp.issparse(t_left):
        t_left = t_left.tocsr()
    s = transition.shape[0]
    x = np.full(s, 1.0 / s)
    for _ in range(max_iter):
        x_next = t_left @ x
        x_next /= x_next.sum()
        if np.max(np.abs(x_next - x)) < tol:
            return x_next
        x = x_next
    return x


def stationary_distribution(chain):
    """Stationary row vector of the chain.

    Uses the dense closed form when the state space is small enough,
    cross-validated against power iteration (agreement 1e-8); larger chains
    fall back to power iteration alone. The result is checked against the
    chain: ||pi T - pi||_inf < 1e-10.
    """
    size = len(chain.states)
    pi_power = stationary_vector_power(chain.transition)
    if size <= DENSE_GUARD:
        try:
            pi = stationary_vector_dense(chain.transition)
        except np.linalg.LinAlgError:
            warnings.warn("closed-form stationary solve is singular; using power iteration")
            pi = pi_power
        else:
            gap = np.max(np.abs(pi - pi_power))
            if gap > CROSS_CHECK_TOL:
                raise ConvergenceError(
                    f"closed-form and power-iteration stationary vectors disagree by {gap:.3e}"
                )
    else:
        pi = pi_power
    residual = np.max(np.abs(pi @ chain.transition - pi))
    if residual > PI_RESIDUAL_TOL or np.min(pi) < -PI_RESIDUAL_TOL or abs(pi.sum() - 1) > 1e-9:
        raise ConvergenceError(
            f"stationary vector failed validation (residual {residual:.3e})",
            residual=residual,
        )
    chain.pi = pi
    chain.pi_power = pi_power
    return pi


def marginal_age_distribution(chain, i):
    """mu_i(t) = sum of stationary mass over states whose i-th age equals t."""
    if chain.pi is None:
        stationary_distribution(chain)
    mu = np.zeros(chain.m_bar + 1)
    np.add.at(mu, chain._coords[:, i], chain.pi)
    return mu


@dataclass
class StabilityVerdict:
    certified: bool
    sigma_max: float
    t0: int
    beta: float
    p: float
    s_radius: np.ndarray  # mu(t) * sigma_max^(2t): the certified series
    s_norm_power: np.ndarray  # mu(t) * ||A^t||^2: diagnostic series
    bound: np.ndarray  # beta / t^p (bound[0] is inf)
    first_bound_violation: int | None
    first_increase: int | None
    tail_mass: float

    def to_dict(self):
        return {
            "verdict": "certified-stable" if self.certified else "not-certified",
            "sigma_max": self.sigma_max,
            "t0": self.t0,
            "beta": self.beta,
            "p": self.p,
            "s_radius": self.s_radius.tolist(),
            "s_norm_power": self.s_norm_power.tolist(),
            "p_series_bound": self.bound.tolist(),
            "first_bound_violation": self.first_bound_violation,
            "first_increase": self.first_increase,
            "tail_mass": self.tail_mass,
        }


def check_stability(mu, A, beta=100.0, p=2.0, t0=4):
    """p-series test of the stationary age marginal against the covariance
    growth rate of A.

    certified-stable iff s(t) = mu(t) * sigma_max(A)^(2t) stays below
    beta / t^p for all t in [t0, m_bar] and is nonincreasing on
    [t0, m_bar - 1]. Both s series (spectral-radius and norm-of-power
    variants) are returned for reporting.
    """
    mu = np.asarray(mu, dtype=float)
    m_bar = len(mu) - 1
    if not (1 <= t0 < m_bar):
        raise DimensionError(f"t0 = {t0} must lie in [1, m_bar)")
    a = mat.as_matrix(A)
    sigma = mat.spectral_radius(a)
    t = np.arange(m_bar + 1)
    s_radius = mu * sigma ** (2 * t)
    powers = np.empty(m_bar + 1)
    ak = np.eye(a.shape[0])
    for k in range(m_bar + 1):
        powers[k] = np.linalg.norm(ak, 2) ** 2
        ak = a @ ak
    s_norm_power = mu * powers
    with np.errstate(divide="ignore"):
        bound = beta / np.maximum(t, 1e-300).astype(float) ** p
    bound[0] = np.inf

    window = slice(t0, m_bar + 1)
    over = np.flatnonzero(s_radius[window] > bound[window])
    first_bound_violation = int(over[0] + t0) if over.size else None
    diffs = np.diff(s_radius[t0:m_bar])  # excludes the saturated final state
    slack = 1e-12 * max(s_radius.max(), 1e-300)
    rising = np.flatnonzero(diffs > slack)
    first_increase = int(rising[0] + t0) if rising.size else None
    certified = first_bound_violation is None and first_increase is None
    return StabilityVerdict(
        certified=certified,
        sigma_max=sigma,
        t0=int(t0),
        beta=float(beta),
        p=float(p),
        s_radius=s_radius,
        s_norm_power=s_norm_power,
        bound=bound,
        first_bound_violation=first_bound_violation,
        first_increase=first_increase,
        tail_mass=float(mu[m_bar]),
    )


def expected_limit_covariance(mu, model):
    """Long-run expected estimator covariance sum_t mu(t) h^t(Pbar) over the
    truncated support. Meaningful as a limit only when the configuration is
    certified stable; otherwise it is just the truncated partial sum."""
    mu = np.asarray(mu, dtype=float)
    total = np.zeros_like(model.P_bar)
    cov = model.P_bar
    for t in range(len(mu)):
        total = total + mu[t] * cov
        if t + 1 < len(mu):
            cov = model.h(cov)
    return mat.symmetrize(total)


def stability_report(models, q, m_bar, beta=100.0, p=2.0, t0=4, policy=None):
    """Build the chain, certify every subsystem, and return a JSON-ready
    report (the CLI serializes this verbatim)."""
    chain = build_chain(models, q, m_bar, policy=policy)
    stationary_distribution(chain)
    report = {
        "n_subsystems": chain.n_subsystems,
        "m_bar": m_bar,
        "beta": beta,
        "p": p,
        "t0": t0,
        "n_states": len(chain.states),
        "stationary_residual": float(
            np.max(np.abs(chain.pi @ chain.transition - chain.pi))
        ),
        "subsystems": [],
    }
    all_certified = True
    for i, model in enumerate(models):
        mu = marginal_age_distribution(chain, i)
        verdict = check_stability(mu, model.A, beta=beta, p=p, t0=t0)
        all_certified &= verdict.certified
        entry = verdict.to_dict()
        entry["subsystem"] = i
        entry["mu"] = mu.tolist()
        entry["expected_limit_covariance_trace"] = float(
            np.trace(expected_limit_covariance(mu, model))
        )
        report["subsystems"].append(entry)
    report["verdict"] = "certified-stable" if all_certified else "not-certified"
    return report
