import numpy as np
import pytest

from covsteer import matcore, sim, steering
from covsteer.errors import NotHurwitz
from covsteer.model import GaussianState, LinearSystem, TimeGrid
from covsteer.stationary import StationaryPolicy
from helpers import EX1_SIGMA


def constant_policy(K, Sigma, hurwitz=True):
    K = np.atleast_2d(K)
    return StationaryPolicy(K=K, X=-Sigma @ K.T, Sigma=Sigma, power=0.0, hurwitz=hurwitz)


def open_loop_plan(sys, N, T=1.0, gains=None):
    grid = TimeGrid.horizon(T, N)
    if gains is None:
        gains = np.zeros((N, sys.m, sys.n))
    return steering.SteeringPlan(
        grid=grid,
        gains=gains,
        feedforward=np.zeros((N + 1, sys.m)),
        cov_pred=np.zeros((N + 1, sys.n, sys.n)),
        mean_pred=np.zeros((N + 1, sys.n)),
        cost=0.0,
    )


def test_config_validation():
    with pytest.raises(ValueError):
        sim.SimConfig(paths=0)
    with pytest.raises(ValueError):
        sim.SimConfig(substeps=0)
    with pytest.raises(ValueError):
        sim.SimConfig(seed=-1)


def test_noiseless_mean_follows_flow():
    # Euler steps integrate the double integrator exactly
    sys = LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[0.0], [0.0]])
    x0 = np.array([1.0, 2.0])
    init = GaussianState(x0, 1e-12 * np.eye(2))
    res = sim.simulate_plan(sys, open_loop_plan(sys, 20), init, sim.SimConfig(paths=50, seed=3))
    expected = np.array([matcore.expm(sys.A, t) @ x0 for t in res.times])
    assert np.abs(res.mean - expected).max() <= 1e-6
    assert np.abs(res.cov).max() <= 1e-10
    assert res.energy_estimate == 0.0


def test_noiseless_covariance_matches_lyapunov_flow():
    sys = LinearSystem([[-0.5, 1.0], [-1.0, -0.2]], [[0.0], [1.0]], [[0.0], [0.0]])
    N = 50
    gains = np.tile([[0.3, 0.4]], (N, 1, 1))
    init = GaussianState.centered(np.array([[1.0, 0.2], [0.2, 0.5]]))
    res = sim.simulate_plan(sys, open_loop_plan(sys, N, gains=gains), init,
                            sim.SimConfig(paths=400, seed=1, substeps=20))
    grid = TimeGrid.horizon(1.0, N)
    flow = steering.propagate_continuous(sys, gains, grid, res.cov[0], Q=np.zeros((2, 2)))
    rel = np.linalg.norm(res.cov - flow, axis=(1, 2)) / np.linalg.norm(flow, axis=(1, 2))
    # Euler-Maruyama bias at step 1e-3
    assert rel.max() < 2e-3


def test_ou_variance_is_held():
    sys = LinearSystem([[-0.5]], [[1.0]], [[1.0]])
    pol = constant_policy([[0.0]], np.ones((1, 1)))
    res = sim.simulate_policy(sys, pol, GaussianState.centered(np.ones((1, 1))), 1.0, 20,
                              sim.SimConfig(paths=10_000, seed=5))
    assert np.abs(res.cov[:, 0, 0] - 1.0).max() <= 0.05


def test_example1_stationary_segment(ex1):
    pol = constant_policy([[1.0, 1.0]], EX1_SIGMA)
    res = sim.simulate_policy(ex1, pol, GaussianState.centered(EX1_SIGMA), 1.0, 20,
                              sim.SimConfig(paths=10_000, seed=2))
    assert np.linalg.norm(res.cov[-1] - EX1_SIGMA) <= 0.05 * np.linalg.norm(EX1_SIGMA)
    assert sim.mean_power(res) == pytest.approx(0.5, rel=0.1)


def test_thread_count_does_not_change_results(ex1):
    pol = constant_policy([[1.0, 1.0]], EX1_SIGMA)
    init = GaussianState.centered(EX1_SIGMA)
    runs = [
        sim.simulate_policy(ex1, pol, init, 1.0, 10, sim.SimConfig(paths=1100, seed=9, threads=t))
        for t in (1, 4)
    ]
    assert np.array_equal(runs[0].states, runs[1].states)
    assert np.array_equal(runs[0].cov, runs[1].cov)
    assert runs[0].energy_estimate == runs[1].energy_estimate


def test_environment_overrides_threads(monkeypatch):
    monkeypatch.setenv("COVSTEER_THREADS", "3")
    assert sim._worker_count(sim.SimConfig(threads=8)) == 3
    monkeypatch.delenv("COVSTEER_THREADS")
    assert sim._worker_count(sim.SimConfig(threads=8)) == 8


def test_path_streams_are_independent_of_chunking():
    a = sim.path_generator(42, 700).standard_normal(5)
    b = sim.path_generator(42, 700).standard_normal(5)
    c = sim.path_generator(42, 701).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_monte_carlo_rate(ex1):
    pol = constant_policy([[1.0, 1.0]], EX1_SIGMA)
    init = GaussianState.centered(EX1_SIGMA)
    devs = []
    for paths in (500, 2000, 8000):
        d = []
        for seed in range(8):
            # fine steps keep the integrator bias below the sampling error
            res = sim.simulate_policy(ex1, pol, init, 0.5, 5,
                                      sim.SimConfig(paths=paths, seed=seed, substeps=100))
            d.append(np.linalg.norm(res.cov[-1] - EX1_SIGMA))
        devs.append(np.mean(d))
    ratios = np.array(devs[:-1]) / np.array(devs[1:])
    # quadrupling the paths roughly halves the deviation
    assert np.all((ratios > 1.5) & (ratios < 3.5))


def test_single_path_has_zero_covariance(ex1):
    pol = constant_policy([[1.0, 1.0]], EX1_SIGMA)
    res = sim.simulate_policy(ex1, pol, GaussianState.centered(EX1_SIGMA), 1.0, 5,
                              sim.SimConfig(paths=1, seed=7))
    assert np.all(res.cov == 0.0)
    assert res.paths == 1
    assert res.energy_estimate >= 0.0


def test_unstable_policy_refused(ex1):
    pol = constant_policy([[0.0, 0.0]], EX1_SIGMA, hurwitz=False)
    with pytest.raises(NotHurwitz):
        sim.simulate_policy(ex1, pol, GaussianState.centered(EX1_SIGMA), 1.0, 5, sim.SimConfig())


def test_plan_shape_checked(ex1, ex2):
    plan = open_loop_plan(ex2, 5)
    with pytest.raises(ValueError):
        sim.simulate_plan(ex1, plan, GaussianState.centered(EX1_SIGMA), sim.SimConfig(paths=2))
