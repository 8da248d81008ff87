"""Matrix numerics shared by all modules.

Riccati maps and solvers for the steady-state filter/controller quantities,
plus spectral helpers. Covariance-valued results are symmetrized as
(X + X^T)/2 on every update to suppress asymmetry drift. Riccati equations
are solved by fixed-point iteration (change tolerance 1e-12, residual
tolerance 1e-9 for the DARE and 1e-10 for the filter fixed point), which is
exact enough at the problem sizes handled here. Tolerances scale with
max(1, ||X||_F): for unit-scale problems they are the absolute figures
above, while badly scaled fixed points (norms of 1e4 and up) would
otherwise sit below the floating-point noise floor.
"""

import warnings

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    NotStabilizableError,
    SingularMatrixError,
)

PSD_TOL = 1e-9
RANK_TOL = 1e-8
FP_CHANGE_TOL = 1e-12
FP_MAX_ITER = 100_000
FP_STALE_LIMIT = 2000  # iterations without improvement = round-off floor
RICCATI_RESIDUAL_TOL = 1e-9
FILTER_RESIDUAL_TOL = 1e-10


def symmetrize(x):
    """(X + X^T)/2."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (x + x.T)


def as_matrix(x):
    """Coerce scalars / 1-d arrays to a 2-d float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(len(a), 1)
    if not np.all(np.isfinite(a)):
        raise DimensionError("matrix entries must be finite")
    return a


def check_psd(x, name="matrix", tol=PSD_TOL):
    """Raise if x is not symmetric PSD within tolerance; return symmetrized x."""
    x = as_matrix(x)
    if x.shape[0] != x.shape[1]:
        raise DimensionError(f"{name} must be square, got {x.shape}")
    if np.max(np.abs(x - x.T)) > tol * max(1.0, np.max(np.abs(x))):
        raise DimensionError(f"{name} must be symmetric")
    x = symmetrize(x)
    if x.shape[0] and np.linalg.eigvalsh(x).min() < -tol * max(1.0, np.abs(x).max()):
        raise DimensionError(f"{name} must be positive semi-definite")
    return x


def is_pd(x, tol=PSD_TOL):
    x = as_matrix(x)
    return x.shape[0] == x.shape[1] and np.linalg.eigvalsh(symmetrize(x)).min() > tol


def h_map(a, w, x):
    """Time-update map: A X A^T + W."""
    a, w, x = as_matrix(a), as_matrix(w), as_matrix(x)
    n = a.shape[0]
    if a.shape[1] != n or w.shape != (n, n) or x.shape != (n, n):
        raise DimensionError(
            f"h_map dimensions do not conform: A{a.shape}, W{w.shape}, X{x.shape}"
        )
    return symmetrize(a @ x @ a.T + w)


def g_map(c, v, x):
    """Measurement-update map: X - X C^T (C X C^T + V)^-1 C X."""
    c, v, x = as_matrix(c), as_matrix(v), as_matrix(x)
    p, n = c.shape
    if x.shape != (n, n) or v.shape != (p, p):
        raise DimensionError(
            f"g_map dimensions do not conform: C{c.shape}, V{v.shape}, X{x.shape}"
        )
    s = c @ x @ c.T + v
    try:
        gain = np.linalg.solve(s, c @ x)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "innovation covariance C X C^T + V is singular; V must be positive definite"
        ) from exc
    return symmetrize(x - x @ c.T @ gain)


def observability_matrix(a, c):
    n = a.shape[0]
    blocks = [c]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


def controllability_matrix(a, b):
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def _matrix_sqrt(x):
    vals, vecs = np.linalg.eigh(symmetrize(x))
    vals = np.clip(vals, 0.0, None)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


def steady_state_error_cov(a, c, w, v):
    """Fixed point of g(h(X)): steady-state posterior filter covariance.

    Iterates from X0 = W until the Frobenius change drops below 1e-12 (at
    most 1e5 iterations) and checks the final residual ||g(h(P)) - P||_F.
    Observability of (A, C) and controllability of (A, W^1/2) are checked by
    rank tests; deficiencies are reported as warnings since the iteration is
    the deciding evidence.
    """
    a, c, w, v = as_matrix(a), as_matrix(c), as_matrix(w), as_matrix(v)
    n = a.shape[0]
    if np.linalg.matrix_rank(observability_matrix(a, c), tol=RANK_TOL) < n:
        warnings.warn("(A, C) looks unobservable at rank tolerance 1e-8")
    if np.linalg.matrix_rank(controllability_matrix(a, _matrix_sqrt(w)), tol=RANK_TOL) < n:
        warnings.warn("(A, W^1/2) looks uncontrollable at rank tolerance 1e-8")
    x = symmetrize(w)
    best, stale = np.inf, 0
    for _ in range(FP_MAX_ITER):
        x_next = g_map(c, v, h_map(a, w, x))
        delta = np.linalg.norm(x_next - x, "fro")
        x = x_next
        if delta < FP_CHANGE_TOL:
            break
        # badly scaled fixed points bottom out above 1e-12 in float64;
        # detect the round-off plateau instead of burning the budget
        if delta < best:
            best, stale = delta, 0
        else:
            stale += 1
            if stale > FP_STALE_LIMIT:
                break
    residual = np.linalg.norm(g_map(c, v, h_map(a, w, x)) - x, "fro")
    if residual >= FILTER_RESIDUAL_TOL * max(1.0, np.linalg.norm(x, "fro")):
        raise ConvergenceError(
            f"filter covariance fixed point residual {residual:.3e} exceeds tolerance",
            residual=residual,
        )
    return x


def solve_dare(a, b, q, r):
    """Solve the discrete-time algebraic Riccati equation by iteration.

    Returns (Pi, L, Gamma) with
        L = -(B^T Pi B + R)^-1 B^T Pi A
        Gamma = L^T (B^T Pi B + R) L
    and checks the DARE residual (< 1e-9) and that A + B L is Schur stable.
    """
    a, b, q, r = as_matrix(a), as_matrix(b), as_matrix(q), as_matrix(r)
    n = a.shape[0]
    if b.shape[0] != n or q.shape != (n, n) or r.shape[0] != r.shape[1]:
        raise DimensionError(
            f"solve_dare dimensions do not conform: A{a.shape}, B{b.shape}, Q{q.shape}, R{r.shape}"
        )
    if np.linalg.matrix_rank(controllability_matrix(a, b), tol=RANK_TOL) < n:
        warnings.warn("(A, B) looks uncontrollable at rank tolerance 1e-8")
    if np.linalg.matrix_rank(observability_matrix(a, _matrix_sqrt(q).T), tol=RANK_TOL) < n:
        warnings.warn("(A, Q^1/2) looks unobservable at rank tolerance 1e-8")
    pi = symmetrize(q)
    best, stale = np.inf, 0
    for _ in range(FP_MAX_ITER):
        s = b.T @ pi @ b + r
        try:
            k = np.linalg.solve(s, b.T @ pi @ a)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("B^T Pi B + R is singular; R must be positive definite") from exc
        pi_next = symmetrize(a.T @ pi @ a + q - a.T @ pi @ b @ k)
        delta = np.linalg.norm(pi_next - pi, "fro")
        pi = pi_next
        if not np.isfinite(delta) or np.abs(pi).max() > 1e100:
            raise NotStabilizableError("Riccati iteration diverged; (A, B) not stabilizable?")
        if delta < FP_CHANGE_TOL:
            break
        if delta < best:
            best, stale = delta, 0
        else:
            stale += 1
            if stale > FP_STALE_LIMIT:
                break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge within {FP_MAX_ITER} iterations",
            residual=delta,
        )
    s = b.T @ pi @ b + r
    gain = -np.linalg.solve(s, b.T @ pi @ a)
    gamma = symmetrize(gain.T @ s @ gain)
    residual = np.linalg.norm(
        symmetrize(a.T @ pi @ a + q - (a.T @ pi @ b) @ np.linalg.solve(s, b.T @ pi @ a)) - pi,
        "fro",
    )
    if residual >= RICCATI_RESIDUAL_TOL * max(1.0, np.linalg.norm(pi, "fro")):
        raise ConvergenceError(
            f"DARE residual {residual:.3e} exceeds tolerance", residual=residual
        )
    closed_loop = spectral_radius(a + b @ gain)
    if closed_loop >= 1.0:
        raise NotStabilizableError(
            f"closed-loop spectral radius {closed_loop:.6f} >= 1; pair not stabilizable"
        )
    return pi, gain, gamma


def spectral_radius(a):
    """max |eigenvalue| of a square matrix."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"spectral_radius needs a square matrix, got {a.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def spectral_norm(a):
    """Largest singular value."""
    a = as_matrix(a)
    return float(np.linalg.norm(a, 2))
