"""Shared test data and instance generators."""

import json

import numpy as np

from covsteer import matcore
from covsteer.model import LinearSystem

# double integrator with noise on position, unit control on velocity
EX1_A = np.array([[0.0, 1.0], [0.0, 0.0]])
EX1_B = np.array([[0.0], [1.0]])
EX1_B1 = np.array([[1.0], [0.0]])
EX1_SIGMA = np.array([[1.0, -0.5], [-0.5, 0.5]])

# third-order chain with a first-order actuator lag
EX2_A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
EX2_B = np.array([[0.0], [0.0], [1.0]])
EX2_B1 = np.array([[0.0], [1.0], [0.0]])


def ex2_sigma():
    """Block assembly from the position/velocity block, cross term and actuator variance."""
    S = np.zeros((3, 3))
    S[:2, :2] = np.diag([7 / 4, 3 / 4])
    S[:2, 2] = S[2, :2] = [-3 / 4, -1 / 2]
    S[2, 2] = 3 / 4
    return S


def random_spd(rng, n, lo=0.5, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return matcore.sym(Q @ np.diag(rng.uniform(lo, hi, n)) @ Q.T)


def random_matched_instance(rng, n=2, m=1):
    """Controllable matched-channel system with random SPD boundaries."""
    while True:
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        sys = LinearSystem(A, B, B)
        ctrl = matcore.controllability_matrix(A, B)
        if np.linalg.svd(ctrl, compute_uv=False).min() > 0.1:
            return sys, random_spd(rng, n), random_spd(rng, n)


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


# one (criterion, passed, detail) entry per acceptance check, printed at session end
ACCEPTANCE_RESULTS = []
