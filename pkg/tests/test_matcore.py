import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from covsteer import matcore
from covsteer.errors import (
    Indeterminate,
    NonFiniteState,
    PositiveDefiniteViolation,
    SingularLyapunov,
)

seeds = st.integers(0, 2**32 - 1)


# --- cholesky ---------------------------------------------------------------


def test_cholesky_identity():
    np.testing.assert_array_equal(matcore.cholesky(np.eye(2)), np.eye(2))


def test_cholesky_known_factor():
    L = matcore.cholesky([[4.0, 2.0], [2.0, 2.0]])
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 1.0]], atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(PositiveDefiniteViolation):
        matcore.cholesky([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_rejects_near_singular_pivot():
    with pytest.raises(PositiveDefiniteViolation):
        matcore.cholesky([[1.0, 1.0], [1.0, 1.0 + 1e-14]])


@given(seeds)
def test_cholesky_reconstruction(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 6)
    M = rng.standard_normal((n, n))
    S = M @ M.T + 0.1 * np.eye(n)
    L = matcore.cholesky(S)
    assert np.all(np.diag(L) > 0)
    assert np.linalg.norm(L @ L.T - S) <= 1e-12 * np.linalg.norm(S)


# --- expm ---------------------------------------------------------------------


def test_expm_zero():
    np.testing.assert_array_equal(matcore.expm(np.zeros((3, 3)), 1.0), np.eye(3))


def test_expm_nilpotent():
    np.testing.assert_allclose(matcore.expm([[0.0, 1.0], [0.0, 0.0]], 1.0), [[1, 1], [0, 1]], atol=1e-15)


def test_expm_scalar():
    assert matcore.expm([[-1.0]], 2.0)[0, 0] == pytest.approx(np.exp(-2.0), rel=1e-14)


@given(seeds)
def test_expm_matches_scipy_and_inverts(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 6)
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0, 5) / max(np.linalg.norm(A, 2), 1e-12)
    t = rng.uniform(-1, 1)
    E = matcore.expm(A, t)
    np.testing.assert_allclose(E, scipy.linalg.expm(A * t), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(E @ matcore.expm(A, -t), np.eye(n), atol=1e-10)


@given(seeds)
def test_expm_semigroup(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    t1, t2 = rng.uniform(0, 1, 2)
    lhs = matcore.expm(A, t1 + t2)
    rhs = matcore.expm(A, t1) @ matcore.expm(A, t2)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(lhs).max())


# --- Lyapunov ----------------------------------------------------------------


def test_lyapunov_scalar():
    assert matcore.solve_lyapunov([[-1.0]], [[1.0]])[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_lyapunov_closed_loop_double_integrator():
    S = matcore.solve_lyapunov([[0.0, 1.0], [-1.0, -1.0]], [[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(S, [[1.0, -0.5], [-0.5, 0.5]], atol=1e-14)


def test_lyapunov_singular():
    with pytest.raises(SingularLyapunov):
        matcore.solve_lyapunov([[0.0, 1.0], [0.0, 0.0]], np.eye(2))


@given(seeds)
def test_lyapunov_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 6)
    F = rng.standard_normal((n, n)) - 3 * np.eye(n)
    G = rng.standard_normal((n, n))
    Q = G @ G.T
    S = matcore.solve_lyapunov(F, Q)
    np.testing.assert_allclose(S, scipy.linalg.solve_continuous_lyapunov(F, -Q), rtol=1e-8, atol=1e-10)
    np.testing.assert_array_equal(S, S.T)


# --- Hurwitz -----------------------------------------------------------------


@pytest.mark.parametrize(
    "F, expected",
    [
        ([[-1.0, 0.0], [0.0, -2.0]], True),
        ([[0.0, 1.0], [-1.0, -1.0]], True),
        ([[0.0, 1.0], [0.0, 0.0]], False),
        ([[1.0, 0.0], [0.0, -1.0]], False),
        ([[0.0, 1.0], [-1.0, 0.0]], False),
    ],
)
def test_is_hurwitz_examples(F, expected):
    assert matcore.is_hurwitz(F) is expected


def test_is_hurwitz_indeterminate_when_probes_disagree(monkeypatch):
    calls = []

    def fake(F):
        calls.append(F)
        if len(calls) == 1:
            raise SingularLyapunov("forced")
        return True

    monkeypatch.setattr(matcore, "_hurwitz_by_lyapunov", fake)
    with pytest.raises(Indeterminate):
        matcore.is_hurwitz(-np.eye(2))


def test_char_poly_roots_match_eigenvalues():
    F = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-6.0, -11.0, -6.0]])
    np.testing.assert_allclose(np.sort(matcore.eigen_oracle(F).real), [-3, -2, -1], atol=1e-10)


# --- rank and controllability ----------------------------------------------------


def test_rank_examples():
    assert matcore.rank_with_tolerance(np.zeros((3, 3))) == 0
    assert matcore.rank_with_tolerance([[1.0, 0.0], [0.0, 0.0]]) == 1
    assert matcore.rank_with_tolerance([[0.0, 1.0], [1.0, 0.0]]) == 2


def test_gramian_scalar():
    assert matcore.controllability_gramian([[0.0]], [[1.0]], 2.0)[0, 0] == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_gramian_double_integrator(T):
    W = matcore.controllability_gramian([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], T)
    expected = [[T**3 / 3, T**2 / 2], [T**2 / 2, T]]
    np.testing.assert_allclose(W, expected, rtol=1e-12)


def test_gramian_uncontrollable_is_singular():
    W = matcore.controllability_gramian([[0.0, 1.0], [0.0, 0.0]], [[1.0], [0.0]], 1.0)
    assert matcore.rank_with_tolerance(W) == 1
    assert not matcore.is_pos_def(W)


@given(seeds)
@settings(max_examples=50)
def test_gramian_pd_iff_rank(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 5)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, 1))
    if rng.uniform() < 0.5:
        # make one mode unreachable
        V = np.linalg.qr(rng.standard_normal((n, n)))[0]
        D = np.diag(rng.standard_normal(n))
        A = V @ D @ V.T
        B = V[:, 1:] @ rng.standard_normal((n - 1, 1))
    W = matcore.controllability_gramian(A, B, 1.0)
    ctrl = matcore.rank_with_tolerance(matcore.controllability_matrix(A, B)) == n
    assert matcore.is_pos_def(W, tol=1e-10 * np.abs(W).sum(axis=1).max()) == ctrl


# --- ODE integration -------------------------------------------------------------


def test_integrate_zero_rhs():
    X0 = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = matcore.integrate_matrix_ode(lambda t, X: np.zeros_like(X), X0, 0.0, 1.0, 7)
    assert out.shape == (8, 2, 2)
    assert np.all(out == X0)


def test_integrate_backward_riccati_scalar():
    out = matcore.integrate_matrix_ode(lambda t, P: P @ P, [[1.0]], 1.0, 0.0, 100)
    assert out[-1, 0, 0] == pytest.approx(0.5, abs=1e-8)


def test_integrate_constant_rhs():
    out = matcore.integrate_matrix_ode(lambda t, S: np.ones_like(S), [[0.0]], 0.0, 1.0, 3)
    assert out[-1, 0, 0] == pytest.approx(1.0, abs=1e-15)


def test_integrate_symmetrizes():
    rhs = lambda t, S: np.array([[0.0, 1.0], [0.0, 0.0]]) @ S + S
    out = matcore.integrate_matrix_ode(rhs, np.eye(2), 0.0, 1.0, 10, symmetric=True)
    assert all(np.array_equal(S, S.T) for S in out)


def test_integrate_detects_escape():
    with pytest.raises(NonFiniteState):
        matcore.integrate_matrix_ode(lambda t, P: P @ P, [[1.0]], 0.0, 2.0, 200)


def test_hermite_reproduces_cubic():
    ts = np.linspace(0, 1, 5)
    f = lambda t: t**3 - t
    df = lambda t: 3 * t**2 - 1
    interp = matcore.HermiteTrajectory(ts, f(ts)[:, None, None], df(ts)[:, None, None])
    for t in (0.1, 0.37, 0.99):
        assert interp(t)[0, 0] == pytest.approx(f(t), abs=1e-14)
