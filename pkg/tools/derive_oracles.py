"""Recompute the frozen reference values used by the test suite.

Independent of the covsteer solvers: the discretized steering programs are
posed with explicit ``Y_k`` blocks and LMI constraints in cvxpy (Clarabel),
and the scalar bridge boundary equations are solved with scipy.

Run from the repository root::

    python3 tools/derive_oracles.py

Requires cvxpy, which is not a runtime or test dependency.
"""

import cvxpy as cp
import numpy as np
from scipy.optimize import fsolve


def steering_sdp(A, B, Q, S0, ST, N, T, scheme):
    n, m = B.shape
    h = T / N
    S = [cp.Constant(S0)] + [cp.Variable((n, n), symmetric=True) for _ in range(N - 1)]
    S.append(cp.Constant(ST))
    n_in = N if scheme == "euler" else N + 1
    U = [cp.Variable((n, m)) for _ in range(n_in)]
    Y = [cp.Variable((m, m), symmetric=True) for _ in range(n_in)]
    w = np.ones(n_in)
    if scheme == "trapezoid":
        w[0] = w[-1] = 0.5
    cons = []
    for j in range(n_in):
        cons.append(cp.bmat([[Y[j], U[j].T], [U[j], S[j]]]) >> 0)

    def drift(Sk, Uk):
        return A @ Sk + Sk @ A.T + B @ Uk.T + Uk @ B.T + Q

    for k in range(N):
        if scheme == "euler":
            cons.append(S[k + 1] == S[k] + h * drift(S[k], U[k]))
        else:
            cons.append(S[k + 1] == S[k] + 0.5 * h * (drift(S[k], U[k]) + drift(S[k + 1], U[k + 1])))
    obj = cp.Minimize(h * sum(w[j] * cp.trace(Y[j]) for j in range(n_in)))
    prob = cp.Problem(obj, cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value


def scalar_bridge():
    """a = 0, b = b1 = 1, Sigma0 = SigmaT = 1, T = 1.

    Pi(t) = -1/(t + c) and H(t) = 1/(t + d); boundary equations
    Pi(0) + H(0) = 1 and Pi(1) + H(1) = 1.
    """

    def eqs(v):
        c, d = v
        return [-1 / c + 1 / d - 1, -1 / (1 + c) + 1 / (1 + d) - 1]

    c, d = fsolve(eqs, [-2.0, 2.0], xtol=1e-14)
    # cost = int_0^1 Pi^2 Sigma dt with Sigma = 1/(Pi + H)
    ts = np.linspace(0.0, 1.0, 200001)
    Pi = -1 / (ts + c)
    H = 1 / (ts + d)
    cost = np.trapezoid(Pi**2 / (Pi + H), ts)
    return c, d, cost


if __name__ == "__main__":
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    B1 = np.array([[1.0], [0.0]])
    S1 = np.array([[1.0, -0.5], [-0.5, 0.5]])
    for scheme in ("euler", "trapezoid"):
        for N in (10, 20):
            val = steering_sdp(A, B, B1 @ B1.T, 2 * np.eye(2), S1, N, 1.0, scheme)
            print(f"example1 {scheme} N={N}: {val!r}")
    c, d, cost = scalar_bridge()
    print(f"scalar bridge c={c!r} d={d!r} cost={cost!r}")
