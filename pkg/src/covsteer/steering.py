"""Finite-horizon covariance steering.

Two solvers produce a :class:`SteeringPlan`:

* :func:`steer_schrodinger` for matched channels (``B == B1``): the coupled
  pair of Riccati flows for ``Pi`` (backward) and ``H`` (forward), linked
  only through ``Sigma0^{-1} = Pi(0) + H(0)`` and ``SigmaT^{-1} = Pi(T) + H(T)``,
  is solved by a damped alternating fixed-point iteration on ``H(0)``.
* :func:`steer_sdp` for general channels: the time-discretized convex program
  of :mod:`covsteer.conic`, with gains recovered as ``K_k = -U_k' Sigma_k^{-1}``.

Means are steered separately by the minimum-energy open-loop input
(:func:`steer_mean`); the feedback acts on the deviation from the mean.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import conic, matcore
from .errors import (
    Infeasible,
    NoConvergence,
    NonFiniteState,
    NotControllable,
    PositiveDefiniteViolation,
    RankDeficientB,
    RiccatiEscape,
)
from .lqr import backward_riccati, propagate_cov, riccati_rhs
from .model import GaussianState, TimeGrid, check_controllable, matrix_list

log = logging.getLogger(__name__)


@dataclass
class SchrodingerSolution:
    grid: TimeGrid
    Pi: np.ndarray
    H: np.ndarray
    boundary_residual: float
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list, repr=False)


@dataclass
class SteeringPlan:
    """Feedback plan ``u = ff(t) - K_k (x - mean(t))`` on ``[t_k, t_{k+1})``.

    ``gains`` has one entry per interval (zero-order hold); ``feedforward``,
    ``cov_pred`` and ``mean_pred`` are sampled at the ``N + 1`` grid nodes.
    """

    grid: TimeGrid
    gains: np.ndarray  # (N, m, n)
    feedforward: np.ndarray  # (N+1, m)
    cov_pred: np.ndarray  # (N+1, n, n)
    mean_pred: np.ndarray  # (N+1, n)
    cost: float
    method: str = ""
    initial: GaussianState = None
    terminal: GaussianState = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": "steering_plan",
            "method": self.method,
            "grid": self.grid.to_dict(),
            "gains": matrix_list(self.gains),
            "feedforward": matrix_list(self.feedforward),
            "cov_pred": matrix_list(self.cov_pred),
            "mean_pred": matrix_list(self.mean_pred),
            "cost": float(self.cost),
            "initial": {
                "mean": matrix_list(self.initial.mean),
                "Sigma": matrix_list(self.initial.cov),
            },
            "terminal": {
                "mean": matrix_list(self.terminal.mean),
                "Sigma": matrix_list(self.terminal.cov),
            },
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        def state(s):
            return GaussianState(np.array(s["mean"], float), np.array(s["Sigma"], float))

        return cls(
            grid=TimeGrid.from_dict(d["grid"]),
            gains=np.array(d["gains"], dtype=float),
            feedforward=np.array(d["feedforward"], dtype=float),
            cov_pred=np.array(d["cov_pred"], dtype=float),
            mean_pred=np.array(d["mean_pred"], dtype=float),
            cost=float(d["cost"]),
            method=d.get("method", ""),
            initial=state(d["initial"]),
            terminal=state(d["terminal"]),
            diagnostics=d.get("diagnostics", {}),
        )


def check_lyapunov_controllability(sys):
    """The differential Lyapunov system is controllable iff (A, B) is."""
    return check_controllable(sys)["controllable"]


def _require_controllable(sys):
    report = check_controllable(sys)
    if not report["controllable"]:
        raise NotControllable(
            f"(A, B) is not controllable: rank {report['rank']} < {sys.n}"
        )


# --- mean steering ---------------------------------------------------------


def mean_steering(sys, x0, xT, grid):
    """Minimum-energy open-loop input and mean trajectory as callables.

    Returns ``(u(t), xbar(t), energy)``.
    """
    A, B = sys.A, sys.B
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xT = np.asarray(xT, dtype=float).reshape(-1)
    t0, T = grid.t_start, grid.length
    W = matcore.controllability_gramian(A, B, T)
    try:
        L = matcore.cholesky(W)
    except PositiveDefiniteViolation as exc:
        raise NotControllable("controllability Gramian is singular") from exc
    eta = xT - matcore.expm(A, T) @ x0
    z = np.linalg.solve(L.T, np.linalg.solve(L, eta))
    energy = float(eta @ z)

    def u(t):
        return B.T @ matcore.expm(A.T, T - (t - t0)) @ z

    def xbar(t):
        s = t - t0
        if s <= 0:
            return x0.copy()
        Ws = matcore.controllability_gramian(A, B, s)
        return matcore.expm(A, s) @ x0 + Ws @ matcore.expm(A.T, T - s) @ z

    return u, xbar, energy


def steer_mean(sys, x0, xT, grid):
    """Minimum-energy input sampled on the grid nodes, and its energy."""
    u, _, energy = mean_steering(sys, x0, xT, grid)
    return np.array([u(t) for t in grid.nodes]), energy


def _mean_parts(sys, prob):
    grid = prob.grid
    x0, xT = prob.initial.mean, prob.terminal.mean
    if not (np.any(x0) or np.any(xT)):
        zeros = np.zeros((grid.steps + 1, sys.m)), np.zeros((grid.steps + 1, sys.n))
        return zeros[0], zeros[1], 0.0
    u, xbar, energy = mean_steering(sys, x0, xT, grid)
    ts = grid.nodes
    return np.array([u(t) for t in ts]), np.array([xbar(t) for t in ts]), energy


# --- covariance propagation -------------------------------------------------


def propagate_discrete(sys, gains, grid, Sigma0, Q):
    """Explicit-Euler covariance recursion used by the discretized program."""
    dt = grid.dt
    out = np.empty((grid.steps + 1,) + Sigma0.shape)
    out[0] = Sigma0
    for k, K in enumerate(gains):
        F = sys.A - sys.B @ K
        out[k + 1] = matcore.sym(out[k] + dt * (F @ out[k] + out[k] @ F.T + Q))
    return out


def propagate_trapezoid(sys, node_gains, grid, Sigma0, Q):
    """Crank-Nicolson covariance recursion with gains given at the nodes.

    Each step solves ``S+ - (h/2) L+(S+) = S + (h/2) L(S) + h Q`` where ``L``
    is the closed-loop Lyapunov operator, i.e. one Lyapunov equation per step.
    """
    h = grid.dt
    n = sys.n
    out = np.empty((grid.steps + 1, n, n))
    out[0] = Sigma0
    F = sys.A - sys.B @ node_gains[0]
    for k in range(grid.steps):
        S = out[k]
        rhs = S + 0.5 * h * (F @ S + S @ F.T) + h * Q
        F = sys.A - sys.B @ node_gains[k + 1]
        out[k + 1] = matcore.solve_lyapunov(0.5 * h * F - 0.5 * np.eye(n), rhs)
    return out


def propagate_continuous(sys, gains, grid, Sigma0, Q=None, substeps=4):
    """Covariance ODE under zero-order-hold gains, RK4 inside each interval."""
    if Q is None:
        Q = sys.noise_cov()
    out = np.empty((grid.steps + 1,) + np.shape(Sigma0))
    out[0] = Sigma0
    S = np.asarray(Sigma0, dtype=float)
    for k, K in enumerate(gains):
        F = sys.A - sys.B @ K
        t = grid.nodes[k]
        S = matcore.integrate_matrix_ode(
            lambda _t, X: F @ X + X @ F.T + Q, S, t, t + grid.dt, substeps, symmetric=True
        )[-1]
        out[k + 1] = S
    return out


def _check_pd(covs, what):
    for k, S in enumerate(covs):
        try:
            matcore.cholesky(S)
        except PositiveDefiniteViolation as exc:
            raise PositiveDefiniteViolation(f"{what} Sigma_{k} is not positive definite") from exc


# --- SDP path ---------------------------------------------------------------


def steer_sdp(
    prob, Q_extra=None, tol=1e-7, boundary_tol=1e-3, max_iter=500, scheme="trapezoid"
):
    """Minimum-energy steering through the discretized semidefinite program.

    ``scheme`` selects the time discretization of the covariance dynamics:
    ``"trapezoid"`` (second order, default) or ``"euler"`` (first order).
    Node gains are recovered as ``K_j = -U_j' Sigma_j^{-1}`` and drive the
    discrete re-propagation. Plan gains are held constant on each interval;
    under the trapezoid rule the held value is the midpoint gain
    ``B' Lambda_k`` read from the dynamics multipliers, which the optimality
    conditions tie to the node gains (``gain_consistency`` reports the
    mismatch).

    Raises
    ------
    NotControllable, Infeasible, NoConvergence, PositiveDefiniteViolation
    """
    sys, grid = prob.system, prob.grid
    _require_controllable(sys)
    Q = sys.noise_cov()
    if Q_extra is not None:
        Q_extra = matcore.sym(matcore.as_matrix(Q_extra, "Q_extra"))
        if np.linalg.eigvalsh(Q_extra).min() < -matcore.RANK_TOL * max(1.0, np.linalg.norm(Q_extra)):
            raise ValueError("Q_extra must be positive semidefinite")
        Q = Q + Q_extra
    Sigma0, SigmaT = prob.initial.cov, prob.terminal.cov
    prog = conic.SteeringProgram(
        sys.A, sys.B, Q, Sigma0, SigmaT, grid.steps, grid.dt, scheme=scheme
    )
    sol = conic.solve(prog, tol=tol, max_iter=max_iter)
    if sol.status == conic.Status.INFEASIBLE:
        raise Infeasible(f"conic solver reports infeasibility (kkt {sol.kkt_residuals})")
    if sol.status != conic.Status.OPTIMAL:
        err = NoConvergence(f"conic solver stopped: {sol.status.value} (kkt {sol.kkt_residuals})")
        err.solution = sol
        raise err
    _check_pd(sol.Sigma, "solver")
    node_gains = -np.swapaxes(sol.U, 1, 2) @ np.linalg.inv(sol.Sigma[: len(sol.U)])
    if scheme == "euler":
        gains = node_gains
        cov = propagate_discrete(sys, gains, grid, Sigma0, Q)
    else:
        # the multiplier of step k sits at the interval midpoint, where the
        # optimality conditions give K = B' Lambda_k
        gains = np.einsum("ji,kjl->kil", sys.B, sol.multipliers)
        cov = propagate_trapezoid(sys, node_gains, grid, Sigma0, Q)
    implied = np.einsum("ji,kjl->kil", sys.B, sol.multipliers)
    if scheme == "trapezoid":
        implied = np.concatenate(
            [implied[:1], 0.5 * (implied[:-1] + implied[1:]), implied[-1:]]
        )
    gain_consistency = float(
        np.abs(implied - node_gains).max() / (1.0 + np.abs(node_gains).max())
    )
    _check_pd(cov, "propagated")
    boundary = float(np.linalg.norm(cov[-1] - SigmaT) / np.linalg.norm(SigmaT))
    if boundary > boundary_tol:
        raise NoConvergence(
            f"terminal covariance misses target by {boundary:.3e} (relative)"
        )
    cont = propagate_continuous(sys, gains, grid, Sigma0, Q)
    defect = float(np.linalg.norm(cont[-1] - SigmaT) / np.linalg.norm(SigmaT))
    ff, mean_pred, mean_energy = _mean_parts(sys, prob)
    diagnostics = {
        "status": sol.status.value,
        "scheme": scheme,
        "kkt_residuals": sol.kkt_residuals,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "dual_bound": sol.dual_bound,
        "boundary_residual": boundary,
        "continuous_boundary_defect": defect,
        "gain_consistency": gain_consistency,
        "covariance_cost": sol.objective,
        "mean_cost": mean_energy,
    }
    plan = SteeringPlan(
        grid=grid,
        gains=gains,
        feedforward=ff,
        cov_pred=cov,
        mean_pred=mean_pred,
        cost=sol.objective + mean_energy,
        method="sdp",
        initial=prob.initial,
        terminal=prob.terminal,
        diagnostics=diagnostics,
    )
    plan.solution = sol
    return plan


# --- Schrodinger path -------------------------------------------------------


def _h_rhs(A, B):
    BB = B @ B.T

    def rhs(t, H):
        return -A.T @ H - H @ A - H @ BB @ H

    return rhs


def _sweep(sys, H0, S0inv, STinv, grid):
    """One forward-H / backward-Pi pass; returns (H traj, Pi traj, residual)."""
    try:
        H = matcore.integrate_matrix_ode(
            _h_rhs(sys.A, sys.B), H0, grid.t_start, grid.t_end, grid.steps, symmetric=True
        )
    except NonFiniteState as exc:
        raise RiccatiEscape(f"H flow escaped: {exc}") from exc
    Pi = backward_riccati(sys, STinv - H[-1], grid)
    res = np.linalg.norm(Pi[0] + H[0] - S0inv) + np.linalg.norm(Pi[-1] + H[-1] - STinv)
    return H, Pi, float(res)


def _svec(S):
    return S[np.triu_indices(S.shape[0])]


def _smat(v, n):
    S = np.zeros((n, n))
    iu = np.triu_indices(n)
    S[iu] = v
    S[(iu[1], iu[0])] = v
    return S


def _newton_direction(sys, H0, Pi0, S0inv, STinv, grid):
    """Newton step for ``H0 + Pi0(H0) = Sigma0^{-1}`` with a forward-difference Jacobian."""
    n = sys.n
    h = _svec(H0)
    F0 = _svec(H0 + Pi0 - S0inv)
    J = np.empty((len(h), len(h)))
    for j in range(len(h)):
        step = 1e-7 * max(1.0, abs(h[j]))
        e = np.zeros_like(h)
        e[j] = step
        Hj = _smat(h + e, n)
        _, Pij, _ = _sweep(sys, Hj, S0inv, STinv, grid)
        J[:, j] = (_svec(Hj + Pij[0] - S0inv) - F0) / step
    return _smat(np.linalg.solve(J, -F0), n)


def solve_schrodinger_system(
    sys, Sigma0, SigmaT, grid, max_iterations=500, tol=1e-9, accelerate=True
):
    """Solve the matched-channel Schrodinger system by iterating on ``H(0)``.

    Starting from ``H(0) = Sigma0^{-1}`` (``Pi(0) = 0``), each sweep integrates
    ``H`` forward, sets ``Pi(T) = SigmaT^{-1} - H(T)``, integrates ``Pi``
    backward and proposes ``H(0) <- Sigma0^{-1} - Pi(0)``. With
    ``accelerate`` a Newton proposal on the same boundary equation is tried
    first; it only replaces the fixed-point proposal when it lowers the
    residual. A proposal whose residual exceeds the current one is rejected
    and its step halved; a Riccati escape counts as a rejection, but two in a
    row on the fixed-point path are fatal.
    """
    S0inv = matcore.spd_inv(Sigma0)
    STinv = matcore.spd_inv(SigmaT)
    H0 = S0inv.copy()
    H, Pi, res = _sweep(sys, H0, S0inv, STinv, grid)
    history = [res]
    theta = 1.0
    it = 1
    escapes = 0
    while res > tol and it < max_iterations:
        it += 1
        if accelerate:
            accepted = False
            try:
                direction = _newton_direction(sys, H0, Pi[0], S0inv, STinv, grid)
            except (RiccatiEscape, np.linalg.LinAlgError):
                direction = None
            step = 1.0
            while direction is not None and step > 1e-3:
                proposal = matcore.sym(H0 + step * direction)
                try:
                    cand = _sweep(sys, proposal, S0inv, STinv, grid)
                except RiccatiEscape:
                    step *= 0.5
                    continue
                if cand[2] < res:
                    H0 = proposal
                    H, Pi, res = cand
                    history.append(res)
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                continue
        proposal = matcore.sym(H0 + theta * (S0inv - Pi[0] - H0))
        try:
            cand = _sweep(sys, proposal, S0inv, STinv, grid)
        except RiccatiEscape:
            escapes += 1
            if escapes > 1:
                raise
            theta *= 0.5
            continue
        escapes = 0
        if cand[2] <= res:
            H0 = proposal
            H, Pi, res = cand
            history.append(res)
            theta = min(1.0, 2.0 * theta)
        else:
            theta *= 0.5
            if theta < 1e-12:
                break
    return SchrodingerSolution(
        grid=grid,
        Pi=Pi,
        H=H,
        boundary_residual=res,
        iterations=it,
        converged=res <= tol,
        residual_history=history,
    )


def steer_schrodinger(prob, max_iterations=500, tol=1e-9):
    """Optimal steering for matched channels; returns ``(solution, plan)``.

    Raises
    ------
    ValueError
        If ``B != B1``.
    NotControllable, NoConvergence, RiccatiEscape
    """
    sys, grid = prob.system, prob.grid
    if not sys.matched:
        raise ValueError("the Schrodinger solver requires matched channels (B == B1)")
    _require_controllable(sys)
    sol = solve_schrodinger_system(
        sys, prob.initial.cov, prob.terminal.cov, grid, max_iterations, tol
    )
    if not sol.converged:
        err = NoConvergence(
            f"Schrodinger iteration stopped at residual {sol.boundary_residual:.3e} "
            f"after {sol.iterations} iterations"
        )
        err.solution = sol
        raise err
    Bt = sys.B.T
    node_gains = np.einsum("ij,kjl->kil", Bt, sol.Pi)
    cov = propagate_cov(sys, sol.Pi, grid, prob.initial.cov)
    _check_pd(cov, "propagated")
    integrand = np.einsum("kij,kjl,kil->k", node_gains, cov, node_gains)
    cov_cost = float(np.trapezoid(integrand, dx=grid.dt))
    boundary = float(np.linalg.norm(cov[-1] - prob.terminal.cov) / np.linalg.norm(prob.terminal.cov))
    ff, mean_pred, mean_energy = _mean_parts(sys, prob)
    diagnostics = {
        "status": "Optimal",
        "iterations": sol.iterations,
        "schrodinger_residual": sol.boundary_residual,
        "boundary_residual": boundary,
        "covariance_cost": cov_cost,
        "mean_cost": mean_energy,
    }
    plan = SteeringPlan(
        grid=grid,
        gains=node_gains[:-1],
        feedforward=ff,
        cov_pred=cov,
        mean_pred=mean_pred,
        cost=cov_cost + mean_energy,
        method="schrodinger",
        initial=prob.initial,
        terminal=prob.terminal,
        diagnostics=diagnostics,
    )
    return sol, plan


# --- optimality check -------------------------------------------------------


def recover_symmetric(B, K):
    """Least-norm symmetric ``Pi`` with ``B' Pi = K`` (least squares if inconsistent).

    Returns ``(Pi, kernel)`` where ``kernel`` is a list of symmetric matrices
    spanning ``{Pi = Pi' : B' Pi = 0}``.
    """
    n, m = B.shape
    if matcore.rank_with_tolerance(B) < m:
        raise RankDeficientB("B does not have full column rank")
    iu = np.triu_indices(n)
    basis = []
    for a, b in zip(*iu):
        E = np.zeros((n, n))
        E[a, b] = E[b, a] = 1.0
        basis.append(E)
    M = np.stack([(B.T @ E).reshape(-1) for E in basis], axis=1)
    coef, *_ = np.linalg.lstsq(M, np.asarray(K, dtype=float).reshape(-1), rcond=None)
    Pi = sum(c * E for c, E in zip(coef, basis))
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > matcore.RANK_TOL * max(1.0, s.max() if s.size else 0.0)))
    kernel = [sum(c * E for c, E in zip(v, basis)) for v in Vt[rank:]]
    return matcore.sym(Pi), kernel


def verify_optimality(sys, plan, Sigma0, SigmaT, substeps=4):
    """Residuals of the coupled optimality system along a plan.

    ``Pi_k`` is recovered from the plan gains, the covariance is re-propagated
    from ``Sigma0`` through the continuous dynamics under the plan gains, and
    ``H_k = Sigma_k^{-1} - Pi_k``. Reported values are never thresholded here.
    """
    grid = plan.grid
    Pis = np.array([recover_symmetric(sys.B, K)[0] for K in plan.gains])
    covs = propagate_continuous(sys, plan.gains, grid, Sigma0, substeps=substeps)
    Hs = np.linalg.inv(covs[:-1]) - Pis
    BB = sys.B @ sys.B.T
    D = BB - sys.noise_cov()
    A = sys.A
    rhs_pi = riccati_rhs(A, sys.B)

    def rhs_h(H, Pi):
        S = Pi + H
        return -A.T @ H - H @ A - H @ BB @ H + S @ D @ S

    dt = grid.dt
    r_pi = 0.0
    r_h = 0.0
    for k in range(len(Pis) - 1):
        Pm = 0.5 * (Pis[k] + Pis[k + 1])
        Hm = 0.5 * (Hs[k] + Hs[k + 1])
        r_pi = max(r_pi, np.linalg.norm((Pis[k + 1] - Pis[k]) / dt - rhs_pi(0.0, Pm)))
        r_h = max(r_h, np.linalg.norm((Hs[k + 1] - Hs[k]) / dt - rhs_h(Hm, Pm)))
    S0inv = matcore.spd_inv(Sigma0)
    STinv = matcore.spd_inv(SigmaT)
    return {
        "riccati_pi": float(r_pi),
        "riccati_h": float(r_h),
        "boundary_initial": float(
            np.linalg.norm(Pis[0] + Hs[0] - S0inv) / np.linalg.norm(S0inv)
        ),
        "boundary_terminal": float(
            np.linalg.norm(np.linalg.inv(covs[-1]) - STinv) / np.linalg.norm(STinv)
        ),
    }
