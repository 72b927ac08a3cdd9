"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible, inadmissible
or unstable input, 3 numerical failure, 4 stationary target needs an
epsilon relaxation.
"""

import argparse
import hashlib
import logging
import os
import sys
import time

import numpy as np

from . import __version__, sim, stationary, steering
from .errors import (
    CovsteerError,
    Infeasible,
    NoConvergence,
    NonFiniteState,
    NotAdmissible,
    NotControllable,
    NotHurwitz,
    PositiveDefiniteViolation,
    RiccatiEscape,
    SchemaError,
    SingularLyapunov,
)
from .lqr import solve_lqr
from .model import (
    GaussianState,
    StationaryProblem,
    SteeringProblem,
    TimeGrid,
    check_channel_inclusion,
    check_controllable,
    load_covariance,
    load_system,
    read_json,
    write_json,
)

log = logging.getLogger("covsteer")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_NEEDS_EPSILON = 4

NUMERIC_FAILURES = (NoConvergence, NonFiniteState, SingularLyapunov, PositiveDefiniteViolation)


class UsageError(Exception):
    """Bad invocation or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x):
    return f"{float(x):.17g}"


def fmt_matrix(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "[" + "; ".join(", ".join(fmt(v) for v in row) for row in M) + "]"


def emit(key, value):
    if isinstance(value, bool):
        text = "true" if value else "false"
    elif isinstance(value, (float, np.floating)):
        text = fmt(value)
    elif isinstance(value, np.ndarray):
        text = fmt_matrix(value)
    else:
        text = str(value)
    print(f"{key}: {text}")


# --- input helpers -----------------------------------------------------------


def file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _read(path):
    try:
        return read_json(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except SchemaError as exc:
        raise UsageError(str(exc)) from exc


def _load_model(path):
    try:
        return load_system(_read(path))
    except (CovsteerError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _load_state(path, n):
    try:
        S, mean = load_covariance(_read(path))
        if S.shape[0] != n:
            _dim_error(path, S, n)
        return GaussianState(np.zeros(n) if mean is None else mean, S)
    except (CovsteerError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _dim_error(path, S, n):
    raise UsageError(f"{path}: matrix is {S.shape[0]}x{S.shape[1]}, system order is {n}")


def _grid(args):
    try:
        return TimeGrid.horizon(args.horizon, args.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def write_manifest(command, inputs, outputs, started, seed=None):
    """Record digests and provenance beside the first output file."""
    if not outputs:
        return None
    manifest = {
        "command": command,
        "tool_version": __version__,
        "inputs": {p: file_digest(p) for p in inputs},
        "seed": seed,
        "wall_clock_seconds": time.time() - started,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "outputs": list(outputs),
    }
    path = os.path.splitext(outputs[0])[0] + ".manifest.json"
    write_json(path, manifest)
    return path


# --- commands ----------------------------------------------------------------


def cmd_check(args):
    sysm = _load_model(args.model)
    ctrl = check_controllable(sysm)
    print(f"model {args.model}: n={sysm.n} m={sysm.m} p={sysm.p}")
    emit("controllable", ctrl["controllable"])
    emit("controllability_rank", ctrl["rank"])
    emit("lyapunov_controllable", steering.check_lyapunov_controllability(sysm))
    emit("channel_inclusion", check_channel_inclusion(sysm))
    emit("matched", sysm.matched)
    if args.sigma:
        state = _load_state(args.sigma, sysm.n)
        prob = StationaryProblem(sysm, state.cov)
        rep = stationary.check_admissible(prob)
        emit("admissible", rep.admissible)
        emit("hotz_skelton", stationary.hotz_skelton_check(prob))
        emit("rank_lhs", rep.rank_lhs)
        emit("rank_rhs", rep.rank_rhs)
        emit("homogeneous_dim", rep.homogeneous_dim)
        emit("assignment_residual", rep.residual)
        if rep.admissible:
            emit("particular_X", rep.particular_X)
    return EXIT_OK


def cmd_steer(args):
    started = time.time()
    sysm = _load_model(args.model)
    init = _load_state(args.sigma0, sysm.n)
    term = _load_state(args.sigmaT, sysm.n)
    prob = SteeringProblem(sysm, init, term, _grid(args))
    method = args.method
    if method == "auto":
        method = "schrodinger" if sysm.matched else "sdp"
    if method == "schrodinger" and not sysm.matched:
        raise UsageError("the schrodinger method requires matched channels (B == B1)")
    try:
        if method == "schrodinger":
            _, plan = steering.steer_schrodinger(prob)
        else:
            plan = steering.steer_sdp(prob, scheme=args.scheme)
    except NotControllable as exc:
        print(f"not controllable: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    doc = plan.to_dict()
    doc["model_digest"] = sysm.digest()
    write_json(args.out, doc)
    diag = plan.diagnostics
    emit("method", method)
    emit("status", diag["status"])
    emit("steps", plan.grid.steps)
    emit("cost", plan.cost)
    emit("covariance_cost", diag["covariance_cost"])
    emit("mean_cost", diag["mean_cost"])
    emit("boundary_residual", diag["boundary_residual"])
    if "kkt_residuals" in diag:
        emit("scheme", diag["scheme"])
        for key, val in diag["kkt_residuals"].items():
            emit(f"kkt_{key}", val)
        emit("iterations", diag["iterations"])
        emit("continuous_boundary_defect", diag["continuous_boundary_defect"])
    else:
        emit("schrodinger_residual", diag["schrodinger_residual"])
        emit("iterations", diag["iterations"])
    emit("plan", args.out)
    write_manifest("steer", [args.model, args.sigma0, args.sigmaT], [args.out], started)
    return EXIT_OK


def _print_policy(policy):
    emit("K", policy.K)
    emit("power", policy.power)
    emit("hurwitz", policy.hurwitz)
    emit("epsilon", policy.epsilon)
    emit("homogeneous_dim", policy.homogeneous_dim)
    emit("lyapunov_residual", policy.lyapunov_residual)
    if policy.achieved_cov is not None:
        emit("achieved_cov", policy.achieved_cov)
        emit("achieved_power", policy.achieved_power)
        emit("defect", policy.defect)


def cmd_stationary(args):
    started = time.time()
    sysm = _load_model(args.model)
    state = _load_state(args.sigma, sysm.n)
    prob = StationaryProblem(sysm, state.cov)
    report = stationary.check_admissible(prob)
    emit("admissible", report.admissible)
    if not report.admissible:
        print("target covariance is not admissible for this system", file=sys.stderr)
        return EXIT_INPUT
    try:
        policy = stationary.min_power_gain(prob, report)
    except NotAdmissible as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    code = EXIT_OK
    if args.epsilon is not None and (args.epsilon > 0 or not policy.hurwitz):
        try:
            policy = stationary.relax_epsilon(prob, policy, args.epsilon)
        except NotHurwitz as exc:
            emit("status", "inconclusive")
            print(f"epsilon relaxation failed: {exc}", file=sys.stderr)
            code = EXIT_NEEDS_EPSILON
    _print_policy(policy)
    if policy.hurwitz:
        try:
            check = stationary.willems_cross_check(sysm, policy)
            emit("are_residual", check["are_residual"])
            emit("hamiltonian_imaginary_axis_clear", check["hamiltonian_imaginary_axis_clear"])
        except CovsteerError as exc:
            emit("willems_check", f"skipped ({exc})")
    elif code == EXIT_OK:
        emit("status", "needs-epsilon")
        print(
            "A - B K is not Hurwitz; rerun with --epsilon EPS for a stabilizing relaxation",
            file=sys.stderr,
        )
        code = EXIT_NEEDS_EPSILON
    if args.out:
        doc = policy.to_dict()
        doc["model_digest"] = sysm.digest()
        write_json(args.out, doc)
        emit("policy", args.out)
        write_manifest("stationary", [args.model, args.sigma], [args.out], started)
    return code


def cmd_lqr(args):
    started = time.time()
    sysm = _load_model(args.model)
    init = _load_state(args.sigma0, sysm.n)
    try:
        M, _ = load_covariance(_read(args.terminal), key="M")
    except (CovsteerError, ValueError) as exc:
        raise UsageError(f"{args.terminal}: {exc}") from exc
    if M.shape != (sysm.n, sysm.n):
        _dim_error(args.terminal, M, sysm.n)
    try:
        sol = solve_lqr(sysm, init.cov, M, _grid(args))
    except RiccatiEscape as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    emit("cost", sol.cost)
    emit("Pi0", sol.Pi[0])
    emit("terminal_cov", sol.cov[-1])
    if args.out:
        doc = sol.to_dict()
        doc["model_digest"] = sysm.digest()
        write_json(args.out, doc)
        emit("solution", args.out)
        write_manifest("lqr", [args.model, args.sigma0, args.terminal], [args.out], started)
    return EXIT_OK


def write_trajectories(path, result):
    P, K1, n = result.states.shape
    m = result.inputs.shape[2]
    t = np.tile(result.times, P)
    idx = np.repeat(np.arange(P), K1)
    body = np.column_stack(
        [t, idx, result.states.reshape(-1, n), result.inputs.reshape(-1, m)]
    )
    header = ",".join(["t", "path"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)])
    fmts = ["%.17g", "%d"] + ["%.17g"] * (n + m)
    np.savetxt(path, body, fmt=fmts, delimiter=",", header=header, comments="")


def write_stats(path, result):
    n = result.mean.shape[1]
    cols = [f"cov_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    cols += [f"mean_{i + 1}" for i in range(n)]
    body = np.column_stack(
        [result.times, result.cov.reshape(len(result.times), -1), result.mean]
    )
    np.savetxt(path, body, fmt="%.17g", delimiter=",", header=",".join(["t"] + cols), comments="")


def read_csv(path):
    """Header and float body of a CSV written by this tool."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, body


def _check_digest(doc, sysm, path, force):
    digest = doc.get("model_digest")
    if digest is not None and digest != sysm.digest() and not force:
        raise UsageError(
            f"{path} was computed for a different model (digest mismatch); use --force to override"
        )


def cmd_simulate(args):
    started = time.time()
    sysm = _load_model(args.model)
    try:
        cfg = sim.SimConfig(args.paths, args.seed, args.substeps, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    inputs = [args.model]
    try:
        if args.plan:
            inputs.append(args.plan)
            doc = _read(args.plan)
            _check_digest(doc, sysm, args.plan, args.force)
            plan = steering.SteeringPlan.from_dict(doc)
            init = _load_state(args.init, sysm.n) if args.init else plan.initial
            result = sim.simulate_plan(sysm, plan, init, cfg)
        else:
            inputs.append(args.policy)
            doc = _read(args.policy)
            _check_digest(doc, sysm, args.policy, args.force)
            policy = stationary.StationaryPolicy.from_dict(doc)
            if args.init:
                init = _load_state(args.init, sysm.n)
            else:
                init = GaussianState.centered(policy.maintained_cov)
            result = sim.simulate_policy(sysm, policy, init, args.horizon, args.steps, cfg)
    except NotHurwitz as exc:
        print(f"unstable policy: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed plan/policy file: missing {exc}") from exc
    except (ValueError, CovsteerError) as exc:
        if isinstance(exc, NUMERIC_FAILURES) and not isinstance(exc, PositiveDefiniteViolation):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        raise UsageError(str(exc)) from exc
    outputs = []
    if args.out:
        write_trajectories(args.out, result)
        outputs.append(args.out)
    if args.stats:
        write_stats(args.stats, result)
        outputs.append(args.stats)
    emit("paths", cfg.paths)
    emit("seed", cfg.seed)
    emit("energy_estimate", result.energy_estimate)
    emit("mean_power", sim.mean_power(result))
    emit("terminal_cov", result.cov[-1])
    for p in outputs:
        emit("wrote", p)
    write_manifest("simulate", inputs, outputs, started, seed=cfg.seed)
    return EXIT_OK


# --- entry point -------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="covsteer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"covsteer {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="controllability and admissibility report")
    p.add_argument("model")
    p.add_argument("sigma", nargs="?")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("steer", help="finite-horizon covariance steering")
    p.add_argument("model")
    p.add_argument("sigma0")
    p.add_argument("sigmaT")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--method", choices=("sdp", "schrodinger", "auto"), default="auto")
    p.add_argument("--scheme", choices=("trapezoid", "euler"), default="trapezoid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("stationary", help="minimum-power stationary gain")
    p.add_argument("model")
    p.add_argument("sigma")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("lqr", help="terminal-cost LQG baseline")
    p.add_argument("model")
    p.add_argument("sigma0")
    p.add_argument("terminal", help="terminal weight file (key M)")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lqr)

    p = sub.add_parser("simulate", help="Monte Carlo of a plan or policy")
    p.add_argument("model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--plan")
    src.add_argument("--policy")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--horizon", type=float, default=1.0, help="policy runs only")
    p.add_argument("--steps", type=int, default=100, help="policy runs only")
    p.add_argument("--init", help="initial state file (default: plan start or policy target)")
    p.add_argument("--out", help="trajectory CSV")
    p.add_argument("--stats", help="per-node statistics CSV")
    p.add_argument("--threads", type=int)
    p.add_argument("--force", action="store_true", help="ignore model digest mismatch")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"covsteer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CovsteerError as exc:
        print(f"covsteer: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
