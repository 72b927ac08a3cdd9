"""Problem-domain types: the plant, Gaussian states, time grids, problems.

Also owns the JSON matrix-file schema: a single top-level object whose
matrices are arrays of row arrays of decimal numbers, e.g.::

    {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "B1": [[1], [0]]}
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import DimensionMismatch, SchemaError

log = logging.getLogger(__name__)

ASYMMETRY_WARN = 1e-9


@dataclass(frozen=True)
class LinearSystem:
    """Time-invariant plant ``dx = A x dt + B u dt + B1 dw``."""

    A: np.ndarray
    B: np.ndarray
    B1: np.ndarray

    def __post_init__(self):
        A = matcore.as_matrix(self.A, "A")
        B = matcore.as_matrix(self.B, "B")
        B1 = matcore.as_matrix(self.B1, "B1")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, A is {n}x{n}")
        if B1.shape[0] != n:
            raise DimensionMismatch(f"B1 has {B1.shape[0]} rows, A is {n}x{n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "B1", B1)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.B1.shape[1]

    @property
    def matched(self):
        """True when control and noise share identical channels (B == B1)."""
        return self.B.shape == self.B1.shape and np.array_equal(self.B, self.B1)

    def noise_cov(self):
        return matcore.sym(self.B1 @ self.B1.T)

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist(), "B1": self.B1.tolist()}

    def digest(self):
        return digest_of(self.to_dict())


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = matcore.sym(matcore.as_matrix(self.cov, "cov"))
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if cov.shape[0] != cov.shape[1]:
            raise DimensionMismatch("covariance must be square")
        if mean.shape[0] != cov.shape[0]:
            raise DimensionMismatch(
                f"mean has length {mean.shape[0]}, covariance is {cov.shape}"
            )
        matcore.cholesky(cov)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def centered(cls, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def n(self):
        return self.cov.shape[0]


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def horizon(cls, T, steps):
        return cls(0.0, float(T), steps)

    @property
    def dt(self):
        return (self.t_end - self.t_start) / self.steps

    @property
    def length(self):
        return self.t_end - self.t_start

    @property
    def nodes(self):
        return self.t_start + self.dt * np.arange(self.steps + 1)

    def to_dict(self):
        return {"t_start": self.t_start, "t_end": self.t_end, "steps": self.steps}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["t_start"]), float(d["t_end"]), int(d["steps"]))


@dataclass(frozen=True)
class SteeringProblem:
    system: LinearSystem
    initial: GaussianState
    terminal: GaussianState
    grid: TimeGrid

    def __post_init__(self):
        n = self.system.n
        for name, g in (("initial", self.initial), ("terminal", self.terminal)):
            if g.n != n:
                raise DimensionMismatch(f"{name} state has order {g.n}, system has {n}")


@dataclass(frozen=True)
class StationaryProblem:
    system: LinearSystem
    target_cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        S = matcore.sym(matcore.as_matrix(self.target_cov, "target_cov"))
        if S.shape != (self.system.n, self.system.n):
            raise DimensionMismatch(
                f"target covariance is {S.shape}, system order is {self.system.n}"
            )
        matcore.cholesky(S)
        object.__setattr__(self, "target_cov", S)


def check_controllable(sys):
    """Kalman rank test on ``[B, AB, ..., A^{n-1}B]``."""
    rank = matcore.rank_with_tolerance(matcore.controllability_matrix(sys.A, sys.B))
    return {"controllable": rank == sys.n, "rank": rank}


def check_channel_inclusion(sys):
    """True iff range(B) is contained in range(B1)."""
    return matcore.rank_with_tolerance(sys.B1) == matcore.rank_with_tolerance(
        np.hstack([sys.B1, sys.B])
    )


# --- JSON schema ---------------------------------------------------------


def digest_of(obj):
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def parse_matrix(value, path):
    """Validate an array-of-row-arrays and return it as a float matrix."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[value]]
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty array of row arrays")
    rows = []
    width = None
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise SchemaError(f"{path}[{i}]", "expected a row array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"{path}[{i}]", f"row has {len(row)} entries, expected {width}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaError(f"{path}[{i}][{j}]", "expected a number")
            if not np.isfinite(x):
                raise SchemaError(f"{path}[{i}][{j}]", "expected a finite number")
        rows.append([float(x) for x in row])
    if width == 0:
        raise SchemaError(path, "rows must be non-empty")
    return np.array(rows)


def parse_vector(value, path):
    if not isinstance(value, list):
        raise SchemaError(path, "expected an array of numbers")
    for i, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise SchemaError(f"{path}[{i}]", "expected a number")
    return np.array(value, dtype=float)


def parse_symmetric(value, path):
    S = parse_matrix(value, path)
    if S.shape[0] != S.shape[1]:
        raise SchemaError(path, f"expected a square matrix, got {S.shape[0]}x{S.shape[1]}")
    asym = np.abs(S - S.T).max()
    if asym > ASYMMETRY_WARN * max(1.0, np.abs(S).max()):
        log.warning("%s: asymmetry %.3e symmetrized on load", path, asym)
    return matcore.sym(S)


def _require(doc, key, path="$"):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected a JSON object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing field")
    return doc[key]


def load_system(document):
    """Build a :class:`LinearSystem` from a parsed JSON object or JSON text."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    mats = {k: parse_matrix(_require(document, k), f"$.{k}") for k in ("A", "B", "B1")}
    return LinearSystem(mats["A"], mats["B"], mats["B1"])


def save_system(sys):
    return sys.to_dict()


def load_covariance(document, key="Sigma"):
    """Covariance from a matrix file.

    The matrix is read from ``key`` or, if absent, from the only matrix in the
    object. An optional ``mean`` vector is returned alongside.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("$", "expected a JSON object")
    if key in document:
        name = key
    else:
        candidates = [k for k in document if k != "mean"]
        if len(candidates) != 1:
            raise SchemaError(f"$.{key}", "missing field")
        name = candidates[0]
    S = parse_symmetric(document[name], f"$.{name}")
    mean = None
    if "mean" in document:
        mean = parse_vector(document["mean"], "$.mean")
        if mean.shape[0] != S.shape[0]:
            raise DimensionMismatch(f"mean has length {mean.shape[0]}, matrix is {S.shape}")
    return S, mean


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON in {path}: {exc}") from exc


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def matrix_list(X):
    """Nested lists for JSON; ``float`` repr round-trips exactly."""
    return np.asarray(X, dtype=float).tolist()
