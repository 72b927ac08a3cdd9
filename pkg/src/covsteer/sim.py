"""Euler-Maruyama Monte Carlo of the closed loop.

Every path owns a Philox stream keyed by ``(seed, path_index)``, so results
do not depend on chunking or thread count. Paths are integrated in chunks
vectorized over paths; per-node statistics are computed from the stored
node states after all chunks finish.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import NotHurwitz

log = logging.getLogger(__name__)

CHUNK = 512


@dataclass(frozen=True)
class SimConfig:
    paths: int = 1000
    seed: int = 0
    substeps: int = 10
    threads: int = None

    def __post_init__(self):
        if int(self.paths) < 1:
            raise ValueError("paths must be >= 1")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass
class SimResult:
    times: np.ndarray  # (N+1,)
    mean: np.ndarray  # (N+1, n)
    cov: np.ndarray  # (N+1, n, n)
    energy_estimate: float
    states: np.ndarray = None  # (paths, N+1, n)
    inputs: np.ndarray = None  # (paths, N+1, m)

    @property
    def paths(self):
        return 0 if self.states is None else self.states.shape[0]


def path_generator(seed, path):
    """Independent, reproducible normal stream for one sample path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path),))
    return np.random.Generator(np.random.Philox(ss))


def _worker_count(cfg):
    env = os.environ.get("COVSTEER_THREADS")
    if env:
        return max(1, int(env))
    if cfg.threads:
        return max(1, int(cfg.threads))
    return os.cpu_count() or 1


def _interp(values, s):
    """Linear interpolation of node samples at fractional index ``s``."""
    k = min(int(s), len(values) - 2)
    w = s - k
    return (1.0 - w) * values[k] + w * values[k + 1]


def _run(sys, nodes, gains, feedforward, mean_ref, init, cfg):
    """Shared integrator.

    ``gains`` holds one gain per interval; the input is
    ``u = ff(t) - K_k (x - mean_ref(t))`` with ``ff`` and ``mean_ref``
    interpolated linearly between nodes.
    """
    A, B, B1 = sys.A, sys.B, sys.B1
    n, m, p = sys.n, sys.m, sys.p
    N = len(nodes) - 1
    sub = int(cfg.substeps)
    h = (nodes[-1] - nodes[0]) / (N * sub)
    sq = np.sqrt(h)
    L = matcore.cholesky(init.cov, tol=0.0)
    x_mean = init.mean
    P = int(cfg.paths)
    states = np.empty((P, N + 1, n))
    inputs = np.empty((P, N + 1, m))
    energy = np.empty(P)

    def control(x, s, k):
        return _interp(feedforward, s) - (x - _interp(mean_ref, s)) @ gains[k].T

    def chunk(lo):
        hi = min(P, lo + CHUNK)
        z0 = np.empty((hi - lo, n))
        dw = np.empty((hi - lo, N * sub, p))
        for i in range(lo, hi):
            g = path_generator(cfg.seed, i)
            z0[i - lo] = g.standard_normal(n)
            dw[i - lo] = g.standard_normal((N * sub, p))
        x = x_mean + z0 @ L.T
        states[lo:hi, 0] = x
        u = control(x, 0.0, 0)
        inputs[lo:hi, 0] = u
        # trapezoid rule on the fine grid: half weight at both ends
        acc = 0.5 * np.einsum("ij,ij->i", u, u)
        for k in range(N):
            for j in range(sub):
                x = x + (x @ A.T + u @ B.T) * h + (sq * dw[:, k * sub + j]) @ B1.T
                idx = k if j + 1 < sub else min(k + 1, N - 1)
                u = control(x, k + (j + 1) / sub, idx)
                acc += np.einsum("ij,ij->i", u, u)
            states[lo:hi, k + 1] = x
            inputs[lo:hi, k + 1] = u
        acc -= 0.5 * np.einsum("ij,ij->i", u, u)
        energy[lo:hi] = acc * h

    starts = range(0, P, CHUNK)
    workers = min(_worker_count(cfg), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(chunk, starts))
    else:
        for lo in starts:
            chunk(lo)

    mean = states.mean(axis=0)
    if P > 1:
        dev = states - mean
        cov = np.einsum("pki,pkj->kij", dev, dev) / (P - 1)
    else:
        cov = np.zeros((N + 1, n, n))
    return SimResult(
        times=np.asarray(nodes, dtype=float),
        mean=mean,
        cov=matcore.sym(cov),
        energy_estimate=float(energy.mean()),
        states=states,
        inputs=inputs,
    )


def simulate_plan(sys, plan, init, cfg):
    """Monte Carlo of a :class:`~covsteer.steering.SteeringPlan` from ``init``."""
    if plan.gains.shape[1:] != (sys.m, sys.n):
        raise ValueError(f"plan gains are {plan.gains.shape[1:]}, system needs {(sys.m, sys.n)}")
    if init.n != sys.n:
        raise ValueError("initial state order does not match the system")
    return _run(
        sys, plan.grid.nodes, plan.gains, plan.feedforward, plan.mean_pred, init, cfg
    )


def simulate_policy(sys, policy, init, horizon, steps, cfg):
    """Monte Carlo of the constant-gain loop ``u = -K x`` over ``[0, horizon]``.

    Raises
    ------
    NotHurwitz
        If the policy is not stabilizing.
    """
    if not policy.hurwitz:
        raise NotHurwitz("refusing to simulate a policy whose closed loop is not Hurwitz")
    if init.n != sys.n:
        raise ValueError("initial state order does not match the system")
    nodes = np.linspace(0.0, float(horizon), int(steps) + 1)
    gains = np.broadcast_to(policy.K, (int(steps), sys.m, sys.n))
    zeros_u = np.zeros((int(steps) + 1, sys.m))
    zeros_x = np.zeros((int(steps) + 1, sys.n))
    return _run(sys, nodes, gains, zeros_u, zeros_x, init, cfg)


def mean_power(result):
    """Time and path average of ``u'u`` from the stored node inputs."""
    uu = np.einsum("pkm,pkm->pk", result.inputs, result.inputs)
    T = result.times[-1] - result.times[0]
    return float(np.trapezoid(uu.mean(axis=0), result.times) / T)
