"""Dense real-matrix numerics used by every other module.

Matrices are plain ``numpy.ndarray`` objects. Symmetric outputs are always
passed through :func:`sym` so that round-off never leaves a visible skew part.

Default tolerances (relative) are shared across the package:

* factorization pivot: ``PIVOT_TOL = 1e-12``
* residual acceptance: ``RESIDUAL_TOL = 1e-10``
* numerical rank: ``RANK_TOL = 1e-9``
"""

import math

import numpy as np
import scipy.linalg

from .errors import (
    Indeterminate,
    NonFiniteState,
    PositiveDefiniteViolation,
    SingularLyapunov,
)

PIVOT_TOL = 1e-12
RESIDUAL_TOL = 1e-10
RANK_TOL = 1e-9


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def sym(S):
    """Symmetric part ``(S + S')/2`` (works on stacks of matrices too)."""
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def cholesky(S, tol=None):
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    PositiveDefiniteViolation
        If some pivot ``L_ii**2`` is at or below ``tol``
        (default ``1e-12 * ||S||_inf``).
    """
    S = sym(as_matrix(S, "S"))
    if S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    scale = np.abs(S).sum(axis=1).max() if S.size else 0.0
    if tol is None:
        tol = PIVOT_TOL * scale
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefiniteViolation("matrix is not positive definite") from exc
    pivots = np.diag(L) ** 2
    if scale == 0.0 or np.any(pivots <= tol):
        raise PositiveDefiniteViolation(
            f"smallest Cholesky pivot {pivots.min() if pivots.size else 0.0:.3e} "
            f"is below tolerance {tol:.3e}"
        )
    return L


def is_pos_def(S, tol=None):
    try:
        cholesky(S, tol)
    except PositiveDefiniteViolation:
        return False
    return True


def spd_inv(S):
    """Inverse of an SPD matrix through its Cholesky factor."""
    L = cholesky(S)
    Linv = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return sym(Linv.T @ Linv)


# Pade coefficients c_k = (2q-k)! q! / ((2q)! k! (q-k)!), q = 6
_PADE_Q = 6
_PADE_C = [
    math.factorial(2 * _PADE_Q - k)
    * math.factorial(_PADE_Q)
    / (math.factorial(2 * _PADE_Q) * math.factorial(k) * math.factorial(_PADE_Q - k))
    for k in range(_PADE_Q + 1)
]


def expm(A, t=1.0):
    """Matrix exponential ``exp(A t)`` by scaling and squaring.

    Uses a diagonal (6, 6) Pade approximant after scaling ``A t`` so that its
    infinity norm is at most 1/2.
    """
    X = as_matrix(A, "A") * float(t)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ValueError("A must be square")
    norm = np.abs(X).sum(axis=1).max() if n else 0.0
    j = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    X = X / 2.0**j
    ident = np.eye(n)
    N = ident * _PADE_C[0]
    D = ident * _PADE_C[0]
    P = ident
    for k in range(1, _PADE_Q + 1):
        P = P @ X
        term = _PADE_C[k] * P
        N = N + term
        D = D + (-1) ** k * term
    E = np.linalg.solve(D, N)
    for _ in range(j):
        E = E @ E
    return E


def kron_lyapunov_operator(F):
    """Matrix of ``vec(S) -> vec(F S + S F')`` in column-major vec convention."""
    n = F.shape[0]
    ident = np.eye(n)
    return np.kron(ident, F) + np.kron(F, ident)


def solve_lyapunov(F, Q, rcond=PIVOT_TOL):
    """Solve ``F S + S F' + Q = 0`` for symmetric ``S``.

    The equation is vectorized into an ``n^2 x n^2`` dense system. A
    reciprocal condition number below ``rcond`` is reported as
    :class:`SingularLyapunov` (some pair of eigenvalues of ``F`` sums to zero).
    """
    F = as_matrix(F, "F")
    Q = sym(as_matrix(Q, "Q"))
    n = F.shape[0]
    if F.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("F and Q must be square and of equal order")
    op = kron_lyapunov_operator(F)
    svals = np.linalg.svd(op, compute_uv=False)
    if svals[0] == 0.0 or svals[-1] <= rcond * svals[0]:
        raise SingularLyapunov(
            "Lyapunov operator is numerically singular "
            f"(sigma_min/sigma_max = {svals[-1] / max(svals[0], 1e-300):.3e})"
        )
    vec = np.linalg.solve(op, -Q.reshape(-1, order="F"))
    return sym(vec.reshape(n, n, order="F"))


def lyapunov_residual(F, S, Q):
    return np.linalg.norm(F @ S + S @ F.T + Q)


def _hurwitz_by_lyapunov(F):
    P = solve_lyapunov(F, np.eye(F.shape[0]))
    return is_pos_def(P)


def is_hurwitz(F, probe=1e-6):
    """Lyapunov-based stability test for a square matrix.

    ``F`` is Hurwitz iff ``F P + P F' + I = 0`` has a positive definite
    solution. When the Lyapunov operator is singular the spectral abscissa is
    non-negative; this is confirmed by probing ``F + delta I`` which must then
    fail the test as well.

    Raises
    ------
    Indeterminate
        If a shifted probe contradicts the singular-case conclusion.
    """
    F = as_matrix(F, "F")
    if F.shape[0] != F.shape[1]:
        raise ValueError("F must be square")
    try:
        return _hurwitz_by_lyapunov(F)
    except SingularLyapunov:
        pass
    scale = max(1.0, np.linalg.norm(F, ord=np.inf))
    for delta in (probe * scale, 100 * probe * scale):
        try:
            if _hurwitz_by_lyapunov(F + delta * np.eye(F.shape[0])):
                raise Indeterminate(
                    f"singular Lyapunov operator but F + {delta:g} I tests Hurwitz"
                )
        except SingularLyapunov:
            continue
    return False


def rank_with_tolerance(M, tol=None):
    """Numerical rank from a column-pivoted QR factorization."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    if tol is None:
        tol = RANK_TOL * np.linalg.norm(M) * max(M.shape)
    R = scipy.linalg.qr(M, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    return int(np.sum(diag > tol))


def controllability_matrix(A, B):
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def controllability_gramian(A, B, T):
    """``W(T) = int_0^T exp(A s) B B' exp(A' s) ds`` via Van Loan's block exponential."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if T <= 0:
        raise ValueError("T must be positive")
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = B @ B.T
    block[n:, n:] = A.T
    E = expm(block, T)
    return sym(E[n:, n:].T @ E[:n, n:])


def char_poly(F):
    """Characteristic polynomial coefficients (highest degree first), Faddeev-LeVerrier."""
    F = as_matrix(F, "F")
    n = F.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(F)
    ident = np.eye(n)
    for k in range(1, n + 1):
        M = F @ M + coeffs[-1] * ident
        coeffs.append(-np.trace(F @ M) / k)
    return np.array(coeffs)


def eigen_oracle(F):
    """Eigenvalues from the roots of the characteristic polynomial."""
    return np.roots(char_poly(F))


def integrate_matrix_ode(rhs, X0, t0, t1, steps, symmetric=False):
    """Classical RK4 on a uniform grid from ``t0`` to ``t1`` (either direction).

    Parameters
    ----------
    rhs : callable
        ``rhs(t, X)`` returning an array shaped like ``X``.
    symmetric : bool
        Symmetrize the state after every step.

    Returns
    -------
    ndarray
        Samples of shape ``(steps + 1,) + X0.shape`` at ``linspace(t0, t1, steps+1)``.

    Raises
    ------
    NonFiniteState
        As soon as any entry overflows.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    X = np.array(X0, dtype=float)
    if symmetric:
        X = sym(X)
    h = (t1 - t0) / steps
    out = np.empty((steps + 1,) + X.shape)
    out[0] = X
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t = t0 + k * h
            k1 = rhs(t, X)
            k2 = rhs(t + 0.5 * h, X + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, X + 0.5 * h * k2)
            k4 = rhs(t + h, X + h * k3)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if symmetric:
                X = sym(X)
            if not np.all(np.isfinite(X)) or np.abs(X).max() > 1e150:
                raise NonFiniteState(f"state left finite range at t = {t + h:.6g}")
            out[k + 1] = X
    return out


class HermiteTrajectory:
    """Piecewise cubic Hermite interpolant of a sampled matrix trajectory.

    Given node values and node derivatives it is fourth-order accurate, which
    matches the RK4 samples it is usually built from.
    """

    def __init__(self, ts, values, derivatives):
        self.ts = np.asarray(ts, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.derivatives = np.asarray(derivatives, dtype=float)

    def __call__(self, t):
        ts = self.ts
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (
            h00 * self.values[k]
            + h10 * h * self.derivatives[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.derivatives[k + 1]
        )
