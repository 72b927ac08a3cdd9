import numpy as np
import pytest

from covsteer import conic, matcore, steering
from covsteer.errors import NotSolved
from covsteer.model import GaussianState, LinearSystem, SteeringProblem, TimeGrid
from helpers import EX1_A, EX1_B, EX1_B1, EX1_SIGMA

ONE = np.ones((1, 1))
ZERO = np.zeros((1, 1))

# cvxpy/Clarabel with explicit Y blocks, see tools/derive_oracles.py
FROZEN_EX1 = {
    ("euler", 10): 7.809958428573781,
    ("euler", 20): 8.511179791783828,
    ("trapezoid", 10): 9.567872721355466,
    ("trapezoid", 20): 9.44586005696031,
}


def ex1_program(N, scheme="trapezoid", T=1.0):
    return conic.SteeringProgram(
        EX1_A, EX1_B, EX1_B1 @ EX1_B1.T, 2 * np.eye(2), EX1_SIGMA, N, T / N, scheme=scheme
    )


@pytest.mark.parametrize("scheme", conic.SCHEMES)
def test_single_step_by_hand(scheme):
    sol = conic.solve(conic.SteeringProgram(ZERO, ONE, ONE, ONE, ONE, 1, 1.0, scheme=scheme))
    assert sol.status == conic.Status.OPTIMAL
    assert sol.objective == pytest.approx(0.25, abs=1e-9)
    assert np.allclose(sol.U, -0.5, atol=1e-9)
    lam = conic.extract_dual_certificates(sol)
    assert lam[0, 0, 0] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("N", [1, 3])
def test_zero_cost_instance(N):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 2))
    Q = 0.3 * np.eye(2)
    S0 = np.eye(2) + 0.1
    h = 0.1
    S = S0.copy()
    for _ in range(N):
        S = S + h * (A @ S + S @ A.T + Q)
    sol = conic.solve(conic.SteeringProgram(A, B, Q, S0, S, N, h, scheme="euler"))
    assert sol.status == conic.Status.OPTIMAL
    assert abs(sol.objective) < 1e-7
    assert np.abs(sol.U).max() < 1e-6
    assert np.abs(conic.extract_dual_certificates(sol)).max() < 1e-6


@pytest.mark.parametrize("scheme,N", sorted(FROZEN_EX1))
def test_matches_independent_sdp(scheme, N):
    sol = conic.solve(ex1_program(N, scheme))
    assert sol.status == conic.Status.OPTIMAL
    assert sol.objective == pytest.approx(FROZEN_EX1[scheme, N], rel=1e-6)


@pytest.mark.parametrize("scheme", conic.SCHEMES)
def test_weak_duality_along_the_path(scheme):
    sol = conic.solve(ex1_program(20, scheme))
    certs = [h for h in sol.history if h[0] == "certify"]
    assert certs
    for _, _, obj, bound, margin in certs:
        if margin >= 0:
            assert obj >= bound - 1e-9 * (1 + abs(obj))
    assert sol.kkt_residuals["gap"] <= 1e-7


def test_returned_primal_is_feasible():
    prog = ex1_program(30)
    sol = conic.solve(prog)
    c1, c2, a, b = prog.step_coefficients
    A, B = prog.A, prog.B

    def lyap(S):
        return A @ S + S @ A.T

    def cross(U):
        return B @ U.T + U @ B.T

    S, U = sol.Sigma, sol.U
    worst = 0.0
    for k in range(prog.N):
        res = (S[k] + c1 * lyap(S[k]) + a * cross(U[k])
               - S[k + 1] + c2 * lyap(S[k + 1]) + b * cross(U[k + 1])
               + prog.dt * prog.Q_eff)
        worst = max(worst, np.abs(res).max())
    assert worst <= 1e-8 * prog.scale
    assert np.allclose(S[0], prog.Sigma0) and np.allclose(S[-1], prog.SigmaT)
    shift = 1e-9 * prog.scale
    for j in range(prog.n_inputs):
        block = np.block([[sol.Y[j], U[j].T], [U[j], S[j]]])
        matcore.cholesky(block + shift * np.eye(len(block)), tol=0.0)


def test_deterministic():
    a = conic.solve(ex1_program(15))
    b = conic.solve(ex1_program(15))
    assert a.objective == b.objective
    assert np.array_equal(a.Sigma, b.Sigma)
    assert np.array_equal(a.U, b.U)


@pytest.mark.parametrize("scheme", conic.SCHEMES)
def test_single_step_example1_is_infeasible(scheme):
    sol = conic.solve(ex1_program(1, scheme))
    assert sol.status == conic.Status.INFEASIBLE
    with pytest.raises(NotSolved):
        conic.extract_dual_certificates(sol)


def test_redundant_equations_are_dropped():
    # without input the scalar flow d Sigma = dt reaches 2 from 1 exactly
    sol = conic.solve(conic.SteeringProgram(ZERO, ZERO, ONE, ONE, 2 * ONE, 4, 0.25))
    assert sol.status == conic.Status.OPTIMAL
    assert abs(sol.objective) < 1e-9
    assert np.allclose(sol.Sigma[:, 0, 0], np.linspace(1, 2, 5))


def test_uncontrolled_scalar_is_infeasible():
    sol = conic.solve(conic.SteeringProgram(ZERO, ZERO, ONE, ONE, 3 * ONE, 4, 0.25))
    assert sol.status == conic.Status.INFEASIBLE


def test_boundary_optimum_certifies_at_default_tolerance():
    sol = conic.solve(ex1_program(2))
    assert sol.status == conic.Status.OPTIMAL
    assert sol.objective == pytest.approx(18.637982663743372, rel=1e-6)
    assert sol.dual_bound <= 18.637982663743372


def test_boundary_optimum_stops_without_certificates():
    # two trapezoid steps: the optimal midpoint covariance is singular, so a
    # tight tolerance cannot be certified before the barrier runs out
    sol = conic.solve(ex1_program(2), tol=1e-9)
    assert sol.status == conic.Status.MAX_ITERATIONS
    assert sol.iterations < 500
    assert sol.objective == pytest.approx(18.637982663743372, rel=1e-6)
    with pytest.raises(NotSolved):
        conic.extract_dual_certificates(sol)


def test_program_validation():
    with pytest.raises(ValueError):
        conic.SteeringProgram(ZERO, ONE, ONE, ONE, ONE, 0, 1.0)
    with pytest.raises(ValueError):
        conic.SteeringProgram(ZERO, ONE, ONE, ONE, ONE, 2, 1.0, scheme="rk4")
    with pytest.raises(ValueError):
        conic.SteeringProgram(ZERO, ONE, np.eye(2), ONE, ONE, 2, 1.0)


@pytest.mark.parametrize("scheme,order", [("euler", 1), ("trapezoid", 2)])
def test_multipliers_track_costate(scheme, order):
    sys = LinearSystem(ZERO, ONE, ONE)
    errors = []
    for N in (25, 50, 100):
        prob = SteeringProblem(
            sys, GaussianState.centered(ONE), GaussianState.centered(ONE), TimeGrid.horizon(1.0, N)
        )
        ref, _ = steering.steer_schrodinger(prob)
        Pi = ref.Pi[:, 0, 0]
        sol = conic.solve(conic.SteeringProgram(ZERO, ONE, ONE, ONE, ONE, N, 1.0 / N, scheme=scheme))
        lam = conic.extract_dual_certificates(sol)[:, 0, 0]
        target = Pi[:-1] if scheme == "euler" else 0.5 * (Pi[:-1] + Pi[1:])
        errors.append(np.abs(lam - target).max())
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all(ratios > 2 ** order * 0.85)
