"""Stationary covariance assignment with minimum input power.

A target ``Sigma`` is admissible when ``W = A Sigma + Sigma A' + B1 B1'``
can be cancelled by a term ``B X' + X B'``. The solution set in ``X`` is
affine; the minimum-power member gives the gain ``K = -X' Sigma^{-1}``.
When ``A - B K`` is not Hurwitz, the gain ``K + (eps/2) B' Sigma^{-1}``
stabilizes the loop at the price of a small covariance defect.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import NotAdmissible, NotHurwitz, RankDeficientB
from .model import matrix_list

log = logging.getLogger(__name__)

ADMISSIBLE_TOL = 1e-9


@dataclass
class AdmissibilityReport:
    admissible: bool
    rank_lhs: int
    rank_rhs: int
    particular_X: np.ndarray = None
    homogeneous_dim: int = 0
    residual: float = 0.0
    kernel: list = field(default_factory=list, repr=False)


@dataclass
class StationaryPolicy:
    """Constant gain ``u = -K x`` holding the state covariance at ``Sigma``.

    For a relaxed policy (``epsilon > 0``) ``Sigma`` is still the target and
    ``achieved_cov`` is the covariance the gain actually maintains.
    """

    K: np.ndarray
    X: np.ndarray
    Sigma: np.ndarray
    power: float
    hurwitz: bool
    epsilon: float = 0.0
    homogeneous_dim: int = 0
    lyapunov_residual: float = 0.0
    power_via_X: float = None
    achieved_cov: np.ndarray = None
    achieved_power: float = None
    defect: float = 0.0

    def to_dict(self):
        d = {
            "kind": "stationary_policy",
            "K": matrix_list(self.K),
            "X": matrix_list(self.X),
            "Sigma": matrix_list(self.Sigma),
            "power": float(self.power),
            "hurwitz": bool(self.hurwitz),
            "epsilon": float(self.epsilon),
            "homogeneous_dim": int(self.homogeneous_dim),
            "lyapunov_residual": float(self.lyapunov_residual),
            "defect": float(self.defect),
        }
        if self.achieved_cov is not None:
            d["achieved_cov"] = matrix_list(self.achieved_cov)
            d["achieved_power"] = float(self.achieved_power)
        return d

    @classmethod
    def from_dict(cls, d):
        achieved = d.get("achieved_cov")
        return cls(
            K=np.array(d["K"], dtype=float),
            X=np.array(d["X"], dtype=float),
            Sigma=np.array(d["Sigma"], dtype=float),
            power=float(d["power"]),
            hurwitz=bool(d["hurwitz"]),
            epsilon=float(d.get("epsilon", 0.0)),
            homogeneous_dim=int(d.get("homogeneous_dim", 0)),
            lyapunov_residual=float(d.get("lyapunov_residual", 0.0)),
            achieved_cov=None if achieved is None else np.array(achieved, dtype=float),
            achieved_power=d.get("achieved_power"),
            defect=float(d.get("defect", 0.0)),
        )

    @property
    def maintained_cov(self):
        """Covariance the closed loop actually holds."""
        return self.Sigma if self.achieved_cov is None else self.achieved_cov


def defect_matrix(sys, Sigma):
    """``W = A Sigma + Sigma A' + B1 B1'``."""
    return matcore.sym(sys.A @ Sigma + Sigma @ sys.A.T + sys.noise_cov())


def _scale(sys, Sigma):
    return 1.0 + np.linalg.norm(sys.A) * np.linalg.norm(Sigma) + np.linalg.norm(sys.noise_cov())


def _cross_operator(B):
    """Matrix of ``vec(X) -> vec(B X' + X B')`` with row-major vec of X (n x m)."""
    n, m = B.shape
    cols = []
    for j in range(n * m):
        X = np.zeros((n, m))
        X.flat[j] = 1.0
        cols.append((B @ X.T + X @ B.T).reshape(-1))
    return np.stack(cols, axis=1)


def check_admissible(prob):
    """Is ``prob.target_cov`` assignable as a stationary covariance?

    Solves ``B X' + X B' = -W`` in the least-squares sense and compares the
    residual with ``1e-9 * scale``. The equivalent rank test
    ``rank [[W, B], [B', 0]] == rank [[0, B], [B', 0]]`` is evaluated as well;
    a disagreement (borderline instance) is logged.
    """
    sys, Sigma = prob.system, prob.target_cov
    B = sys.B
    n, m = B.shape
    W = defect_matrix(sys, Sigma)
    scale = _scale(sys, Sigma)
    M = _cross_operator(B)
    coef, *_ = np.linalg.lstsq(M, -W.reshape(-1), rcond=None)
    residual = float(np.linalg.norm(M @ coef + W.reshape(-1)))
    admissible = residual <= ADMISSIBLE_TOL * scale

    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > matcore.RANK_TOL * max(1.0, s[0])))
    kernel = [v.reshape(n, m) for v in Vt[rank:]]

    zero = np.zeros((m, m))
    rank_tol = ADMISSIBLE_TOL * scale
    rank_lhs = matcore.rank_with_tolerance(np.block([[W, B], [B.T, zero]]), tol=rank_tol)
    rank_rhs = matcore.rank_with_tolerance(
        np.block([[np.zeros((n, n)), B], [B.T, zero]]), tol=rank_tol
    )
    if admissible != (rank_lhs == rank_rhs):
        log.warning(
            "least-squares test (residual %.3e) and rank test (%d vs %d) disagree",
            residual, rank_lhs, rank_rhs,
        )
    return AdmissibilityReport(
        admissible=bool(admissible),
        rank_lhs=rank_lhs,
        rank_rhs=rank_rhs,
        particular_X=coef.reshape(n, m) if admissible else None,
        homogeneous_dim=n * m - rank,
        residual=residual,
        kernel=kernel,
    )


def hotz_skelton_check(prob):
    """``W`` vanishes after projecting onto range(B)-perp on both sides."""
    sys, Sigma = prob.system, prob.target_cov
    W = defect_matrix(sys, Sigma)
    B = sys.B
    perp = np.eye(sys.n) - B @ np.linalg.pinv(B)
    return bool(np.linalg.norm(perp @ W @ perp) <= ADMISSIBLE_TOL * _scale(sys, Sigma))


def _policy_from_X(sys, Sigma, X, eps=0.0, homogeneous_dim=0):
    P = matcore.spd_inv(Sigma)
    K = -X.T @ P
    F = sys.A - sys.B @ K
    correction = eps * sys.B @ sys.B.T
    residual = float(np.linalg.norm(F @ Sigma + Sigma @ F.T + sys.noise_cov() + correction))
    return StationaryPolicy(
        K=K,
        X=X,
        Sigma=Sigma,
        power=float(np.trace(K @ Sigma @ K.T)),
        power_via_X=float(np.trace(X.T @ P @ X)),
        hurwitz=matcore.is_hurwitz(F),
        epsilon=float(eps),
        homogeneous_dim=homogeneous_dim,
        lyapunov_residual=residual,
    )


def min_power_gain(prob, report=None):
    """Minimum-power constant gain assigning ``prob.target_cov``.

    Minimizes ``trace(X' Sigma^{-1} X)`` over the affine solution set
    ``X_p + sum_j c_j X_j`` of the assignment equation through the normal
    equations in ``c``. The returned policy may have ``hurwitz=False``.

    Raises
    ------
    NotAdmissible
    """
    if report is None:
        report = check_admissible(prob)
    if not report.admissible:
        raise NotAdmissible(
            f"target covariance is not assignable (residual {report.residual:.3e})"
        )
    Sigma = prob.target_cov
    P = matcore.spd_inv(Sigma)
    X = report.particular_X
    if report.kernel:
        basis = report.kernel
        G = np.array([[np.trace(Xi.T @ P @ Xj) for Xj in basis] for Xi in basis])
        g = np.array([np.trace(Xi.T @ P @ X) for Xi in basis])
        c = np.linalg.solve(matcore.sym(G), -g)
        X = X + sum(ci * Xi for ci, Xi in zip(c, basis))
    return _policy_from_X(prob.system, Sigma, X, homogeneous_dim=report.homogeneous_dim)


def relax_epsilon(prob, policy, eps):
    """Stabilizing perturbation ``K_eps = K + (eps/2) B' Sigma^{-1}``.

    The returned policy keeps the target in ``Sigma`` and records the
    covariance it really maintains in ``achieved_cov`` together with the
    defect ``||Sigma - achieved_cov||_F``. ``eps = 0`` on a Hurwitz policy
    returns the policy unchanged.

    Raises
    ------
    NotHurwitz
        If the perturbed loop does not test Hurwitz.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        if policy.hurwitz:
            return policy
        raise NotHurwitz("eps = 0 cannot stabilize a non-Hurwitz policy")
    sys, Sigma = prob.system, prob.target_cov
    P = matcore.spd_inv(Sigma)
    K = policy.K + 0.5 * eps * sys.B.T @ P
    F = sys.A - sys.B @ K
    if not matcore.is_hurwitz(F):
        raise NotHurwitz(f"A - B K_eps is not Hurwitz at eps = {eps:g}")
    achieved = matcore.solve_lyapunov(F, sys.noise_cov())
    relaxed = _policy_from_X(sys, Sigma, -Sigma @ K.T, eps=eps, homogeneous_dim=policy.homogeneous_dim)
    relaxed.achieved_cov = achieved
    relaxed.achieved_power = float(np.trace(K @ achieved @ K.T))
    relaxed.defect = float(np.linalg.norm(Sigma - achieved))
    return relaxed


def willems_cross_check(sys, policy, tol=1e-6):
    """Read the policy as the stabilizing solution of an algebraic Riccati equation.

    A symmetric ``Pi`` with ``B' Pi = K`` is recovered (least norm),
    ``Q = -A' Pi - Pi A + Pi B B' Pi`` is formed, and the Hamiltonian
    ``[[A, -B B'], [-Q, -A']]`` is checked for eigenvalues within
    ``tol * ||Ham||`` of the imaginary axis using characteristic-polynomial
    roots. ``kernel_gain_spread`` is the largest gain change observed when a
    kernel element is added to ``Pi``; it is zero up to round-off because
    ``K`` is unique while ``Pi`` and ``Q`` are not.

    Raises
    ------
    RankDeficientB
    """
    from .steering import recover_symmetric

    A, B = sys.A, sys.B
    if matcore.rank_with_tolerance(B) < B.shape[1]:
        raise RankDeficientB("B does not have full column rank")
    Pi, kernel = recover_symmetric(B, policy.K)
    BB = B @ B.T
    Q = matcore.sym(-A.T @ Pi - Pi @ A + Pi @ BB @ Pi)
    are = float(np.linalg.norm(A.T @ Pi + Pi @ A - Pi @ BB @ Pi + Q))
    ham = np.block([[A, -BB], [-Q, -A.T]])
    eig = matcore.eigen_oracle(ham)
    clear = bool(np.abs(eig.real).min() > tol * max(1.0, np.linalg.norm(ham)))
    spread = 0.0
    for N in kernel:
        spread = max(spread, float(np.abs(B.T @ (Pi + N) - B.T @ Pi).max()))
    return {
        "Q": Q,
        "Pi": Pi,
        "are_residual": are,
        "hamiltonian_imaginary_axis_clear": clear,
        "gain_residual": float(np.abs(B.T @ Pi - policy.K).max()),
        "kernel_dim": len(kernel),
        "kernel_gain_spread": spread,
        "closed_loop_hurwitz": matcore.is_hurwitz(A - BB @ Pi),
    }
