"""Interior-point solver for the time-discretized covariance steering SDP.

The program, for ``k = 0..N-1``::

    minimize    dt * sum_j w_j trace(Y_j)
    subject to  Sigma_{k+1} - Sigma_k = dt * (dynamics rule)
                [[Y_j, U_j'], [U_j, Sigma_j]] >= 0
                Sigma_0, Sigma_N fixed,

with ``F(S, U) = A S + S A' + B U' + U B' + Q`` and two rules:

* ``"euler"``: ``Sigma_{k+1} = Sigma_k + dt F(Sigma_k, U_k)``, inputs at nodes
  ``0..N-1``, unit weights (first order in ``dt``);
* ``"trapezoid"``: ``Sigma_{k+1} = Sigma_k + dt/2 (F(Sigma_k, U_k) +
  F(Sigma_{k+1}, U_{k+1}))``, inputs at nodes ``0..N``, trapezoid weights
  (second order in ``dt``).

Each LMI block gets the barrier ``-mu log det``. Minimizing the barrier
subproblem over ``Y_j`` in closed form gives ``Y_j = U_j' Sigma_j^{-1} U_j +
mu/(w_j dt) I``, so the Newton iteration runs on ``(Sigma_j, U_j)`` only, with
the matrix-fractional objective ``dt w_j trace(U_j' Sigma_j^{-1} U_j)`` and a
``-mu log det Sigma_j`` barrier. ``Y_k`` is reconstructed for the returned
solution. Equalities are handled by an infeasible-start Newton method on the
full KKT system, solved by sparse LU.

Dual certificates are the multipliers ``Lambda_k`` of the dynamics
equalities; they discretize the costate ``Pi(t_k)`` and give the exact
Lagrangian lower bound

    g(Lambda) = <C_0, Sigma_0> + <C_N, Sigma_N> + dt sum_k <Lambda_k, Q>

valid whenever the coefficient ``C_j`` of every free ``Sigma_j`` is PSD (see
:func:`dual_bound`). For the Euler rule ``C_j = Lambda_j + dt R(Lambda_j) -
Lambda_{j-1}`` with ``R(L) = A'L + L A - L B B' L``, a discrete Riccati
inequality.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import matcore
from .errors import NotSolved

log = logging.getLogger(__name__)

STEP_TO_BOUNDARY = 0.99
BARRIER_REDUCTION = 0.2
SCHEMES = ("euler", "trapezoid")


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class SteeringProgram:
    A: np.ndarray
    B: np.ndarray
    Q_eff: np.ndarray
    Sigma0: np.ndarray
    SigmaT: np.ndarray
    N: int
    dt: float
    scheme: str = "trapezoid"

    def __post_init__(self):
        self.A = matcore.as_matrix(self.A, "A")
        self.B = matcore.as_matrix(self.B, "B")
        self.Q_eff = matcore.sym(matcore.as_matrix(self.Q_eff, "Q_eff"))
        self.Sigma0 = matcore.sym(matcore.as_matrix(self.Sigma0, "Sigma0"))
        self.SigmaT = matcore.sym(matcore.as_matrix(self.SigmaT, "SigmaT"))
        n = self.A.shape[0]
        for name in ("Q_eff", "Sigma0", "SigmaT"):
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
        if self.B.shape[0] != n:
            raise ValueError("B must have n rows")
        if self.N < 1 or not self.dt > 0:
            raise ValueError("need N >= 1 and dt > 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def n_inputs(self):
        """Number of input nodes: N (Euler) or N + 1 (trapezoid)."""
        return self.N if self.scheme == "euler" else self.N + 1

    @property
    def weights(self):
        w = np.ones(self.n_inputs)
        if self.scheme == "trapezoid":
            w[0] = w[-1] = 0.5
        return w

    @property
    def step_coefficients(self):
        """``(c1, c2, a, b)`` of ``L1(S_k) + a G(U_k) - L2(S_{k+1}) + b G(U_{k+1})``.

        ``L1(S) = S + c1 (A S + S A')`` and ``L2(S) = S - c2 (A S + S A')``.
        """
        h = self.dt
        if self.scheme == "euler":
            return h, 0.0, h, 0.0
        return 0.5 * h, 0.5 * h, 0.5 * h, 0.5 * h

    @property
    def scale(self):
        return 1.0 + np.sqrt(
            sum(
                np.linalg.norm(M) ** 2
                for M in (self.A, self.B, self.Q_eff, self.Sigma0, self.SigmaT)
            )
        )


@dataclass
class ConicSolution:
    Sigma: np.ndarray  # (N+1, n, n)
    U: np.ndarray  # (n_inputs, n, m)
    Y: np.ndarray  # (n_inputs, m, m)
    objective: float
    kkt_residuals: dict
    status: Status
    scheme: str = "trapezoid"
    iterations: int = 0
    dual_bound: float = float("-inf")
    multipliers: np.ndarray = field(default=None, repr=False)  # (N, n, n)
    history: list = field(default_factory=list, repr=False)


class _Layout:
    """Index bookkeeping: x = [u_0, s_1, u_1, ..., s_{N-1}, u_{N-1}, (u_N)]."""

    def __init__(self, prog):
        n, m, N = prog.n, prog.m, prog.N
        self.n, self.m, self.N = n, m, N
        self.n_inputs = prog.n_inputs
        self.iu = np.triu_indices(n)
        self.ns = len(self.iu[0])
        self.nu = n * m
        self.nv = self.nu * self.n_inputs + (N - 1) * self.ns
        basis = np.zeros((self.ns, n, n))
        for i, (a, b) in enumerate(zip(*self.iu)):
            basis[i, a, b] = 1.0
            basis[i, b, a] = 1.0
        self.sym_basis = basis
        ubasis = np.zeros((self.nu, n, m))
        for j in range(self.nu):
            ubasis[j].flat[j] = 1.0
        self.u_basis = ubasis
        offdiag = self.iu[0] != self.iu[1]
        self.coord_weight = np.where(offdiag, 2.0, 1.0)
        self.body_end = self.nu + (N - 1) * (self.ns + self.nu)

    def s_slice(self, k):
        start = self.nu + (k - 1) * (self.ns + self.nu)
        return slice(start, start + self.ns)

    def u_slice(self, k):
        if k == 0:
            return slice(0, self.nu)
        if k == self.N:
            return slice(self.body_end, self.body_end + self.nu)
        start = self.nu + (k - 1) * (self.ns + self.nu) + self.ns
        return slice(start, start + self.nu)

    def svec(self, S):
        return S[..., self.iu[0], self.iu[1]]

    def smat(self, s):
        S = np.zeros(s.shape[:-1] + (self.n, self.n))
        S[..., self.iu[0], self.iu[1]] = s
        S[..., self.iu[1], self.iu[0]] = s
        return S

    def sym_coords(self, G):
        """Coordinates ``<E_i, G>`` of a symmetric gradient."""
        return self.coord_weight * matcore.sym(G)[..., self.iu[0], self.iu[1]]

    def unpack(self, x, prog):
        N, n, m = self.N, self.n, self.m
        Sigma = np.empty((N + 1, n, n))
        Sigma[0] = prog.Sigma0
        Sigma[N] = prog.SigmaT
        U = np.empty((self.n_inputs, n, m))
        U[0] = x[: self.nu].reshape(n, m)
        if N > 1:
            body = x[self.nu : self.body_end].reshape(N - 1, self.ns + self.nu)
            Sigma[1:N] = self.smat(body[:, : self.ns])
            U[1:N] = body[:, self.ns :].reshape(N - 1, n, m)
        if self.n_inputs > N:
            U[N] = x[self.body_end :].reshape(n, m)
        return Sigma, U

    def pack(self, Sigma, U):
        N = self.N
        x = np.empty(self.nv)
        x[: self.nu] = U[0].reshape(-1)
        if N > 1:
            body = np.concatenate([self.svec(Sigma[1:N]), U[1:N].reshape(N - 1, -1)], axis=1)
            x[self.nu : self.body_end] = body.reshape(-1)
        if self.n_inputs > N:
            x[self.body_end :] = U[N].reshape(-1)
        return x

    def multipliers_to_matrices(self, nu):
        """Dynamics multipliers as symmetric matrices ``Lambda_k``."""
        v = nu.reshape(self.N, self.ns) / self.coord_weight
        return self.smat(v)


def _equality_system(prog, lay):
    """Sparse ``A_eq`` and right-hand side ``b`` of the discrete dynamics."""
    N, dt = prog.N, prog.dt
    A, B = prog.A, prog.B
    c1, c2, a, b = prog.step_coefficients

    def svec_map(f, basis):
        return np.stack([lay.svec(f(E)) for E in basis], axis=1)

    L1 = svec_map(lambda E: E + c1 * (A @ E + E @ A.T), lay.sym_basis)
    L2 = svec_map(lambda E: E - c2 * (A @ E + E @ A.T), lay.sym_basis)
    G = svec_map(lambda F: B @ F.T + F @ B.T, lay.u_basis)
    rows, cols, vals = [], [], []

    def put(block, r0, c0):
        rr, cc = np.nonzero(block)
        rows.append(rr + r0)
        cols.append(cc + c0)
        vals.append(block[rr, cc])

    const = np.tile(dt * lay.svec(prog.Q_eff), (N, 1))
    for k in range(N):
        r0 = k * lay.ns
        if k == 0:
            const[0] += L1 @ lay.svec(prog.Sigma0)
        else:
            put(L1, r0, lay.s_slice(k).start)
        put(a * G, r0, lay.u_slice(k).start)
        if k + 1 < N:
            put(-L2, r0, lay.s_slice(k + 1).start)
        else:
            const[k] -= L2 @ lay.svec(prog.SigmaT)
        if b and k + 1 < lay.n_inputs:
            put(b * G, r0, lay.u_slice(k + 1).start)
    Aeq = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N * lay.ns, lay.nv),
    )
    return Aeq, -const.reshape(-1)


class _Barrier:
    """Objective, gradient and Hessian of the reduced barrier subproblem."""

    def __init__(self, prog, lay):
        self.prog, self.lay = prog, lay
        self.P0 = matcore.spd_inv(prog.Sigma0)
        self.PT = matcore.spd_inv(prog.SigmaT)
        self.wdt = prog.weights * prog.dt

    def inverses(self, Sigma):
        """Inverses of the free Sigma_1..Sigma_{N-1} and their total log det.

        Returns ``(None, None)`` if any of them is not positive definite.
        """
        inner = Sigma[1:-1]
        if len(inner) == 0:
            return np.empty((0,) + Sigma.shape[1:]), 0.0
        try:
            L = np.linalg.cholesky(inner)
        except np.linalg.LinAlgError:
            return None, None
        d = np.diagonal(L, axis1=1, axis2=2)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            return None, None
        eye = np.broadcast_to(np.eye(Sigma.shape[1]), inner.shape)
        Linv = np.linalg.solve(L, eye)
        P = np.einsum("kji,kjl->kil", Linv, Linv)
        return matcore.sym(P), 2.0 * np.log(d).sum()

    def _input_precisions(self, Pin):
        parts = [self.P0[None], Pin]
        if self.lay.n_inputs > self.lay.N:
            parts.append(self.PT[None])
        return np.concatenate(parts)

    def value(self, x, mu):
        Sigma, U = self.lay.unpack(x, self.prog)
        Pin, logdet = self.inverses(Sigma)
        if Pin is None:
            return np.inf
        P = self._input_precisions(Pin)
        frac = np.einsum("k,kia,kij,kja->", self.wdt, U, P, U)
        return frac - mu * logdet

    def objective(self, Sigma, U):
        P = self._input_precisions(np.linalg.inv(Sigma[1:-1]))
        return float(np.einsum("k,kia,kij,kja->", self.wdt, U, P, U))

    def _parts(self, x):
        Sigma, U = self.lay.unpack(x, self.prog)
        Pin, _ = self.inverses(Sigma)
        if Pin is None:
            return None
        P = self._input_precisions(Pin)
        V = P @ U
        return P, V, V @ np.swapaxes(V, 1, 2)

    def gradient(self, x, mu, parts=None):
        """Gradient, or ``None`` outside the positive definite cone."""
        lay = self.lay
        N = lay.N
        parts = parts or self._parts(x)
        if parts is None:
            return None
        P, V, VVt = parts
        w = self.wdt[:, None, None]
        # free covariances are inputs 1..N-1
        free = slice(1, N)
        g = np.empty(lay.nv)
        gU = 2.0 * w * V
        gS = -w[free] * VVt[free] - mu * P[free]
        g[: lay.nu] = gU[0].reshape(-1)
        if N > 1:
            body = np.concatenate([lay.sym_coords(gS), gU[free].reshape(N - 1, -1)], axis=1)
            g[lay.nu : lay.body_end] = body.reshape(-1)
        if lay.n_inputs > N:
            g[lay.body_end :] = gU[N].reshape(-1)
        return g

    def derivatives(self, x, mu):
        lay = self.lay
        N, ns = lay.N, lay.ns
        parts = self._parts(x)
        g = self.gradient(x, mu, parts)
        P, V, VVt = parts
        w = self.wdt[:, None, None]
        Vt = np.swapaxes(V, 1, 2)

        d = ns + lay.nu
        Hb = np.zeros((lay.n_inputs, d, d))
        for j, E in enumerate(lay.sym_basis):
            PE = P @ E
            RS = w * (PE @ VVt + VVt @ np.swapaxes(PE, 1, 2)) + mu * PE @ P
            RU = -2.0 * w * PE @ V
            Hb[:, :ns, j] = lay.sym_coords(RS)
            Hb[:, ns:, j] = RU.reshape(lay.n_inputs, -1)
        for j, F in enumerate(lay.u_basis):
            PF = P @ F
            RS = -w * (PF @ Vt + V @ np.swapaxes(PF, 1, 2))
            RU = 2.0 * w * PF
            Hb[:, :ns, ns + j] = lay.sym_coords(RS)
            Hb[:, ns:, ns + j] = RU.reshape(lay.n_inputs, -1)
        Hb = 0.5 * (Hb + np.swapaxes(Hb, 1, 2))
        blocks = [Hb[0, ns:, ns:]] + list(Hb[1:N])
        if lay.n_inputs > N:
            blocks.append(Hb[N, ns:, ns:])
        return g, sp.block_diag(blocks, format="csc")


def _max_step(Sigma, dSigma):
    """Largest alpha keeping every free Sigma_k + alpha dSigma_k positive definite."""
    inner, dinner = Sigma[1:-1], dSigma[1:-1]
    if len(inner) == 0:
        return np.inf
    L = np.linalg.cholesky(inner)
    X = np.linalg.solve(L, dinner)
    M = np.linalg.solve(L, np.swapaxes(X, 1, 2))
    lam = np.linalg.eigvalsh(matcore.sym(M)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def dual_bound(prog, Lam):
    """Lagrangian dual value at multipliers ``Lam`` and its feasibility margin.

    Minimizing the Lagrangian over each input gives
    ``-<Lt_j B B' Lt_j / (w_j dt), Sigma_j>`` with ``Lt_j = a Lam_j + b Lam_{j-1}``,
    so every covariance enters linearly with coefficient

        C_j = L1*(Lam_j) - L2*(Lam_{j-1}) - Lt_j B B' Lt_j / (w_j dt).

    Returns ``(g, min_eig)`` where ``g`` is the constant part and ``min_eig``
    the smallest eigenvalue over the free ``C_j``; ``g`` is a valid lower bound
    on the optimum when ``min_eig >= 0``.
    """
    A, dt, N = prog.A, prog.dt, prog.N
    BB = prog.B @ prog.B.T
    c1, c2, a, b = prog.step_coefficients
    wdt = prog.weights * dt

    def coeff(j):
        C = np.zeros((prog.n, prog.n))
        Lt = np.zeros_like(C)
        if j < N:
            C += Lam[j] + c1 * (A.T @ Lam[j] + Lam[j] @ A)
            Lt += a * Lam[j]
        if j >= 1:
            C -= Lam[j - 1] - c2 * (A.T @ Lam[j - 1] + Lam[j - 1] @ A)
            Lt += b * Lam[j - 1]
        if j < prog.n_inputs:
            C -= Lt @ BB @ Lt / wdt[j]
        return C

    value = np.sum(coeff(0) * prog.Sigma0) + np.sum(coeff(N) * prog.SigmaT)
    value += dt * np.einsum("kij,ij->", Lam, prog.Q_eff)
    margin = np.inf
    if N > 1:
        C = np.array([coeff(j) for j in range(1, N)])
        margin = float(np.linalg.eigvalsh(matcore.sym(C)).min())
    return float(value), margin


def initial_point(prog):
    """Linear interpolation of the covariance, zero inputs."""
    w = np.linspace(0.0, 1.0, prog.N + 1)[:, None, None]
    Sigma = (1 - w) * prog.Sigma0 + w * prog.SigmaT
    U = np.zeros((prog.n_inputs, prog.n, prog.m))
    return Sigma, U


def solve(prog, tol=1e-7, max_iter=500):
    """Solve a :class:`SteeringProgram` to relative KKT tolerance ``tol``.

    Returns a :class:`ConicSolution` whose status is ``Optimal``,
    ``Infeasible`` or ``MaxIterations`` (best iterate attached). The last
    is also reported when the barrier parameter is exhausted without
    certificates, which happens when the optimum has a singular Sigma_k.
    Residuals are relative to ``1 + ||data||_F``; the gap is relative to
    ``1 + |obj|``.
    """
    lay = _Layout(prog)
    Aeq, beq = _equality_system(prog, lay)
    AeqT = Aeq.T.tocsc()
    bar = _Barrier(prog, lay)
    scale = prog.scale
    n_rows = Aeq.shape[0]
    rows = np.arange(n_rows)
    try:
        normal = spla.splu((Aeq @ AeqT).tocsc())
    except RuntimeError:
        rows = _independent_rows(Aeq, beq, scale)
        if rows is None:
            return _inconsistent(prog, Aeq, beq, scale)
        log.debug("dropping %d redundant dynamics equations", n_rows - len(rows))
        Aeq, beq = Aeq[rows], beq[rows]
        AeqT = Aeq.T.tocsc()
        normal = spla.splu((Aeq @ AeqT).tocsc())
    n_barrier = prog.n * (prog.N - 1)

    Sigma, U = initial_point(prog)
    x = lay.pack(Sigma, U)
    mu = scale / (n_barrier + 1)
    history = []
    status = Status.MAX_ITERATIONS
    it = 0
    stalled = 0
    report = None

    def certify(x, mu):
        g, _ = bar.derivatives(x, mu)
        nu = -normal.solve(Aeq @ g)
        Sigma, U = lay.unpack(x, prog)
        obj = bar.objective(Sigma, U)
        full = np.zeros(n_rows)
        full[rows] = nu
        Lam = lay.multipliers_to_matrices(full)
        bound, margin = dual_bound(prog, Lam)
        primal = np.abs(Aeq @ x - beq).max() / scale
        stationarity = np.abs(g + AeqT @ nu).max() / scale
        dual = max(stationarity, max(0.0, -margin) / scale)
        gap = max(obj - bound, mu * n_barrier) / (1.0 + abs(obj))
        history.append(("certify", mu, float(obj), float(bound), float(margin)))
        return {"primal": float(primal), "dual": float(dual), "gap": float(gap)}, obj, bound, Lam

    def newton(x, r):
        g, H = bar.derivatives(x, mu)
        K = sp.bmat([[H, AeqT], [Aeq, None]], format="csc")
        dx = spla.splu(K).solve(np.concatenate([-g, -r]))[: lay.nv]
        Sigma, _ = lay.unpack(x, prog)
        dSigma, _ = lay.unpack(dx, prog)
        dSigma[0] = 0.0
        dSigma[-1] = 0.0
        return g, dx, min(1.0, STEP_TO_BOUNDARY * _max_step(Sigma, dSigma))

    def center(x, frozen):
        """Damped Newton on the barrier subproblem; ``frozen`` keeps ``Aeq x`` fixed."""
        nonlocal it
        while it < max_iter:
            it += 1
            r = np.zeros(len(beq)) if frozen else Aeq @ x - beq
            g, dx, alpha = newton(x, r)
            decrement = float(-g @ dx)
            f0 = bar.value(x, mu)
            converged = decrement <= 1e-12 * (1.0 + abs(f0))
            # below the decrement floor the barrier value is rounding noise,
            # so the final Newton step is taken without a line search
            while not converged and alpha > 1e-14:
                if bar.value(x + alpha * dx, mu) <= f0 - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            x = x + alpha * dx
            history.append(("center", mu, alpha, decrement))
            if converged or alpha <= 1e-8:
                break
        return x

    try:
        while it < max_iter:
            r = Aeq @ x - beq
            if np.abs(r).max() > 1e-3 * tol * scale:
                # A partial step along the Newton direction satisfies the
                # equalities exactly for a right-hand side moved toward beq,
                # so re-center there before the next attempt.
                it += 1
                _, dx, alpha = newton(x, r)
                while alpha > 1e-12 and bar.gradient(x + alpha * dx, mu) is None:
                    alpha *= 0.5
                history.append(("infeasible", mu, alpha, float(np.abs(r).max())))
                stalled = stalled + 1 if alpha <= 1e-8 else 0
                if stalled > 20:
                    status = Status.INFEASIBLE
                    break
                x = x + alpha * dx
                if alpha < 1.0:
                    x = center(x, frozen=True)
                continue
            x = center(x, frozen=False)
            report, obj, bound, Lam = certify(x, mu)
            if max(report.values()) <= tol:
                status = Status.OPTIMAL
                break
            if mu * n_barrier < 1e-3 * tol * (1.0 + abs(obj)):
                # barrier exhausted without certificates (optimum on the boundary)
                break
            mu *= BARRIER_REDUCTION
    except RuntimeError:
        log.debug("singular KKT matrix at iteration %d", it)
        status = Status.INFEASIBLE

    Sigma, U = lay.unpack(x, prog)
    if report is None or status == Status.INFEASIBLE:
        try:
            report, obj, bound, Lam = certify(x, mu)
        except (np.linalg.LinAlgError, TypeError, ValueError):
            report = {"primal": np.inf, "dual": np.inf, "gap": np.inf}
            obj, bound, Lam = float("nan"), float("-inf"), None
    node_cov = Sigma[: lay.n_inputs]
    P = np.linalg.inv(node_cov)
    Y = np.swapaxes(U, 1, 2) @ P @ U + (mu / bar.wdt)[:, None, None] * np.eye(prog.m)
    log.debug("conic solve: status=%s iterations=%d kkt=%s", status, it, report)
    return ConicSolution(
        Sigma=Sigma,
        U=U,
        Y=matcore.sym(Y),
        objective=float(obj),
        kkt_residuals=report,
        status=status,
        scheme=prog.scheme,
        iterations=it,
        dual_bound=float(bound),
        multipliers=Lam,
        history=history,
    )


def _independent_rows(Aeq, beq, scale):
    """Indices of a maximal independent set of equations, or None if inconsistent."""
    dense = Aeq.toarray()
    x, *_ = np.linalg.lstsq(dense, beq, rcond=None)
    if np.abs(dense @ x - beq).max() / scale > 1e-10:
        return None
    _, R, piv = sla.qr(dense.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > matcore.RANK_TOL * max(1.0, d[0])))
    return np.sort(piv[:rank])


def _inconsistent(prog, Aeq, beq, scale):
    """Dynamics equations with no solution at all: report infeasibility."""
    x, *_ = np.linalg.lstsq(Aeq.toarray(), beq, rcond=None)
    primal = float(np.abs(Aeq @ x - beq).max() / scale)
    log.debug("inconsistent dynamics constraints, residual %.3e", primal)
    Sigma, U = initial_point(prog)
    return ConicSolution(
        Sigma=Sigma,
        U=U,
        Y=np.zeros((prog.n_inputs, prog.m, prog.m)),
        objective=float("nan"),
        kkt_residuals={"primal": primal, "dual": float("inf"), "gap": float("inf")},
        status=Status.INFEASIBLE,
        scheme=prog.scheme,
    )


def extract_dual_certificates(sol):
    """Symmetrized multipliers ``Lambda_k`` of the dynamics equalities.

    Under the Euler rule ``Lambda_k`` approximates the costate at ``t_k``;
    under the trapezoid rule it sits at the interval midpoint.
    """
    if sol.status != Status.OPTIMAL or sol.multipliers is None:
        raise NotSolved(f"no certificates for a solution with status {sol.status}")
    return matcore.sym(sol.multipliers)
