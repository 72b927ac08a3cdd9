"""Terminal-cost LQG baseline.

Minimizes ``E{ int_0^T u'u dt + x(T)' M x(T) }``. The Riccati flow is
integrated backward from ``Pi(T) = M`` and the closed-loop covariance forward
from ``Sigma0``.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import NonFiniteState, RiccatiEscape
from .model import TimeGrid, matrix_list


def riccati_rhs(A, B):
    """Right-hand side of ``dPi/dt = -A'Pi - Pi A + Pi B B' Pi``."""
    BB = B @ B.T

    def rhs(t, Pi):
        return -A.T @ Pi - Pi @ A + Pi @ BB @ Pi

    return rhs


def closed_loop_cov_rhs(A, B, Q, gain_at):
    """Right-hand side of the covariance flow under ``u = -K(t) x``."""

    def rhs(t, S):
        F = A - B @ gain_at(t)
        return F @ S + S @ F.T + Q

    return rhs


@dataclass
class LqrSolution:
    grid: TimeGrid
    Pi: np.ndarray  # (N+1, n, n)
    gains: np.ndarray  # (N+1, m, n)
    cov: np.ndarray  # (N+1, n, n)
    cost: float

    def to_dict(self):
        return {
            "kind": "lqr_solution",
            "grid": self.grid.to_dict(),
            "Pi": matrix_list(self.Pi),
            "gains": matrix_list(self.gains),
            "cov": matrix_list(self.cov),
            "cost": float(self.cost),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            TimeGrid.from_dict(d["grid"]),
            np.array(d["Pi"], dtype=float),
            np.array(d["gains"], dtype=float),
            np.array(d["cov"], dtype=float),
            float(d["cost"]),
        )


def backward_riccati(sys, terminal, grid):
    """Integrate the Riccati flow backward; returns samples ordered forward in time."""
    rhs = riccati_rhs(sys.A, sys.B)
    try:
        back = matcore.integrate_matrix_ode(
            rhs, terminal, grid.t_end, grid.t_start, grid.steps, symmetric=True
        )
    except NonFiniteState as exc:
        raise RiccatiEscape(f"Riccati solution escaped: {exc}") from exc
    return back[::-1].copy()


def propagate_cov(sys, Pi, grid, Sigma0, Q=None):
    """Forward covariance under ``u = -B' Pi(t) x`` with Hermite-interpolated Pi."""
    rhs_pi = riccati_rhs(sys.A, sys.B)
    ts = grid.nodes
    dPi = np.array([rhs_pi(t, P) for t, P in zip(ts, Pi)])
    Pi_t = matcore.HermiteTrajectory(ts, Pi, dPi)
    Bt = sys.B.T
    if Q is None:
        Q = sys.noise_cov()
    rhs = closed_loop_cov_rhs(sys.A, sys.B, Q, lambda t: Bt @ Pi_t(t))
    return matcore.integrate_matrix_ode(
        rhs, Sigma0, grid.t_start, grid.t_end, grid.steps, symmetric=True
    )


def solve_lqr(sys, Sigma0, M, grid):
    """Optimal terminal-cost regulator on ``grid``.

    The cost ``trace(Sigma0 Pi(0)) + int trace(B1 B1' Pi) dt`` uses the
    trapezoidal rule on the grid nodes.

    Raises
    ------
    RiccatiEscape
        When ``Pi`` leaves the finite range (possible for indefinite ``M``).
    """
    M = matcore.sym(matcore.as_matrix(M, "M"))
    Sigma0 = matcore.sym(matcore.as_matrix(Sigma0, "Sigma0"))
    Pi = backward_riccati(sys, M, grid)
    gains = np.einsum("ji,kjl->kil", sys.B, Pi)
    cov = propagate_cov(sys, Pi, grid, Sigma0)
    noise = sys.noise_cov()
    integrand = np.einsum("ij,kji->k", noise, Pi)
    cost = float(np.trace(Sigma0 @ Pi[0]) + np.trapezoid(integrand, dx=grid.dt))
    return LqrSolution(grid, Pi, gains, cov, cost)
