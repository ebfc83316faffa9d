"""Command-line entry point ``orthwalk``.

Exit codes: 0 success, 1 a check or analysis failed, 2 bad parameters or
input files.  Every run carries a manifest (argv, input digests, seed,
version, wall time): ``#`` lines at the top of text/csv output, the first
line of json-lines output, and a ``.manifest.json`` sidecar next to every
file written.

Randomness comes from ``--seed`` only.  Monte Carlo return times split
episodes into fixed blocks seeded by ``(seed, block)``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .lyapunov import (
    GeometricCertificate,
    LyapunovError,
    check_geometric,
    check_linear,
    geometric_from_linear,
    mixing_inputs,
)
from .machine import Halted, MachineError, StuckError, cm_run, load_machine, parse_configuration, trace
from .queueing import PolicyError, embedded_chain, load_factor, load_queue_spec, queue_simulate
from .reduction import (
    ReductionError,
    compile_deterministic,
    compile_extended,
    compiled_from_kernel,
)
from .stationary import (
    StateSpaceTooLarge,
    StationaryError,
    approx_stationary,
    ldrate,
    return_time,
    solve_stationary_exact,
)
from .walk import (
    DeadFaceError,
    WalkError,
    format_face,
    format_rational,
    format_state,
    load_kernel,
    parse_rational,
    parse_state,
    save_kernel,
    simulate,
    validate_kernel,
)


class ParamError(Exception):
    pass


class CheckFailed(Exception):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    argv: list
    inputs: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__
    wall_time: float = 0.0

    def add_input(self, path):
        self.inputs[str(path)] = _sha256(path)

    def write_sidecar(self, path):
        Path(str(path) + ".manifest.json").write_text(json.dumps(asdict(self), indent=1) + "\n")


def _fmt(x):
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    if isinstance(x, tuple):
        return format_state(x)
    return x


class Report:
    """Collects summary lines and tables, then prints them in the chosen format.

    Floats are printed with full ``repr`` precision; rationals as ``num/den``.
    """

    def __init__(self, fmt: str, manifest: RunManifest):
        self.fmt = fmt
        self.manifest = manifest
        self.summary: list[tuple[str, object]] = []
        self.tables: list[tuple[str, list[str], list[list]]] = []

    def line(self, key, value):
        self.summary.append((key, value))

    def table(self, name, columns, rows):
        self.tables.append((name, list(columns), [list(r) for r in rows]))

    def emit(self, out):
        m = asdict(self.manifest)
        if self.fmt == "json-lines":
            out.write(json.dumps({"manifest": m}) + "\n")
            if self.summary:
                out.write(json.dumps({k: _json_value(v) for k, v in self.summary}) + "\n")
            for name, cols, rows in self.tables:
                for r in rows:
                    out.write(json.dumps({"table": name, **{c: _json_value(v) for c, v in zip(cols, r)}}) + "\n")
            return
        for k, v in m.items():
            out.write(f"# {k}: {json.dumps(v)}\n")
        w = csv.writer(out, lineterminator="\n")
        if self.fmt == "text":
            for k, v in self.summary:
                out.write(f"{k} = {_fmt(v)}\n")
        elif self.summary:
            w.writerow(["key", "value"])
            for k, v in self.summary:
                w.writerow([k, _fmt(v)])
        for name, cols, rows in self.tables:
            if self.fmt == "text" or self.summary or len(self.tables) > 1:
                out.write(f"# table: {name}\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(v) for v in r])


def _json_value(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


# ---------------------------------------------------------------- argument helpers


def _rational(text) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _vector(text, manifest: RunManifest) -> list[Fraction]:
    """Inline ``1,0,2/3`` or a file with a JSON list, ``{"w": [...]}`` or whitespace-separated values."""
    path = Path(text)
    if path.is_file():
        manifest.add_input(path)
        raw = path.read_text().strip()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            doc = raw.replace(",", " ").split()
        if isinstance(doc, dict):
            doc = doc.get("w")
        if not isinstance(doc, list):
            raise ParamError(f"{text}: expected a list of weights")
        items = doc
    else:
        items = [s for s in text.split(",") if s.strip()]
    try:
        return [Fraction(x) if isinstance(x, float) else parse_rational(str(x).strip()) for x in items]
    except ValueError as exc:
        raise ParamError(f"weights {text!r}: {exc}") from None


def _kernel(path, manifest):
    manifest.add_input(path)
    return load_kernel(path)


def _chain_for(kernel):
    walk = compiled_from_kernel(kernel)
    return walk if walk is not None else kernel


def _state(text, dim):
    try:
        return parse_state(text, dim)
    except ValueError as exc:
        raise ParamError(str(exc)) from None


def _progress(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_walk_validate(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    result = validate_kernel(kernel)
    rep.line("dimension", kernel.dimension)
    rep.line("faces", len(kernel.faces()))
    rep.line("valid", result.ok)
    if not result.ok:
        rep.table("violations", ["violation"], [[v] for v in result.violations])
        raise CheckFailed(f"{len(result.violations)} violation(s)")


def cmd_walk_simulate(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    start = _state(args.start, kernel.dimension)
    rep.manifest.seed = args.seed
    path = simulate(kernel, start, args.horizon, args.seed)
    cols = ["t"] + [f"q{i + 1}" for i in range(kernel.dimension)]
    rows = [[t, *s] for t, s in enumerate(path)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows(rows)
        rep.line("trajectory", args.out)
        rep.line("final", path[-1])
        rep.outputs.append(args.out)
    else:
        rep.table("trajectory", cols, rows)


def cmd_cm_run(args, rep):
    rep.manifest.add_input(args.machine)
    machine = load_machine(args.machine)
    start = parse_configuration(args.start)
    if start.state not in machine.states:
        raise ParamError(f"unknown state {start.state!r}")
    result = cm_run(machine, start, args.max_steps)
    if isinstance(result, Halted):
        rep.line("status", "halted")
        rep.line("steps", result.steps)
    else:
        rep.line("status", "running")
        rep.line("configuration", str(result.config))
    if args.trace:
        rows = [[t, c.state, c.z1, c.z2] for t, c in enumerate(trace(machine, start, args.max_steps))]
        rep.table("trace", ["t", "state", "z1", "z2"], rows)


def cmd_compile(args, rep):
    rep.manifest.add_input(args.machine)
    machine = load_machine(args.machine)
    if args.deterministic:
        kernel = compile_deterministic(machine)
        cert = None
    else:
        if args.p is None:
            raise ParamError("--p is required (or use --deterministic)")
        if not 0 < args.p < 1:
            raise ParamError(f"p outside (0,1): {format_rational(args.p)}")
        walk = compile_extended(machine, args.p, args.with_q3, args.C, args.strict_steps)
        kernel, cert = walk.kernel, walk.lyapunov
    report = validate_kernel(kernel)
    if not report.ok:
        raise CheckFailed(f"compiled kernel is invalid:\n{report}")
    save_kernel(kernel, args.output)
    rep.outputs.append(args.output)
    rep.line("kernel", args.output)
    rep.line("dimension", kernel.dimension)
    rep.line("faces", len(kernel.faces()))
    if cert is not None:
        cert_path = _cert_path(args.output)
        Path(cert_path).write_text(json.dumps(cert.to_json(), indent=1) + "\n")
        rep.outputs.append(cert_path)
        rep.line("certificate", cert_path)
        rep.line("w", "(" + ",".join(format_rational(x) for x in cert.w) + ")")


def _cert_path(kernel_path) -> str:
    p = Path(kernel_path)
    return str(p.with_name(p.stem + ".cert.json"))


def _linear_weights(args, kernel, rep):
    if args.w:
        return _vector(args.w, rep.manifest), args.gamma
    walk = compiled_from_kernel(kernel)
    if walk is None:
        raise ParamError("--w is required for kernels that were not compiled from a machine")
    gamma = args.gamma if args.gamma is not None else walk.lyapunov.gamma
    return list(walk.lyapunov.w), gamma


def cmd_lyapunov_linear(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    w, gamma = _linear_weights(args, kernel, rep)
    gamma = Fraction(1) if gamma is None else gamma
    if len(w) != kernel.dimension:
        raise ParamError(f"weight vector has {len(w)} entries, kernel has {kernel.dimension}")
    res = check_linear(kernel, w, gamma)
    rep.table(
        "face_drift",
        ["face", "drift"],
        [[format_face(mask, kernel.dimension), res.drifts[mask]] for mask in sorted(res.drifts)],
    )
    rep.line("gamma", gamma)
    rep.line("pass", res.ok)
    if not res.ok:
        rep.line("failing_face", format_face(res.face, kernel.dimension))
        rep.line("failing_drift", res.drift)
        raise CheckFailed(res.describe(kernel.dimension))


def cmd_lyapunov_geometric(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    if args.cert:
        rep.manifest.add_input(args.cert)
        cert = GeometricCertificate.from_json(json.loads(Path(args.cert).read_text()))
    else:
        args.w = args.from_linear
        w, gamma = _linear_weights(args, kernel, rep)
        cert = geometric_from_linear(kernel, w, Fraction(1) if gamma is None else gamma, delta_hi=args.delta_hi)
    res = check_geometric(kernel, cert)
    rep.line("delta", cert.delta)
    rep.line("gamma_g", cert.gamma_g)
    rep.line("b_max", cert.b_max)
    rep.line("pass", res.ok)
    rep.table(
        "face_ratio",
        ["face", "ratio"],
        [[format_face(mask, kernel.dimension), r] for mask, r in sorted(res.ratios.items())],
    )
    if args.output:
        Path(args.output).write_text(json.dumps(cert.to_json(), indent=1) + "\n")
        rep.outputs.append(args.output)
        rep.line("certificate", args.output)
    if not res.ok:
        raise CheckFailed(f"ratio {res.ratio} > gamma_g on face {format_face(res.face, kernel.dimension)}")


def _load_geometric(path, rep) -> GeometricCertificate:
    rep.manifest.add_input(path)
    try:
        return GeometricCertificate.from_json(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ParamError(f"{path}: not a geometric certificate ({exc})") from None


def cmd_lyapunov_mixing(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    cert = _load_geometric(args.cert, rep)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mi = mixing_inputs(kernel, cert)
    rep.line("nu", mi.nu)
    rep.line("p_B_min", mi.p_B_min)
    rep.line("gamma_g", mi.gamma_g)
    rep.line("b_max", mi.b_max)
    for w in mi.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_stationary_return(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    target = _state(args.target, kernel.dimension)
    chain = _chain_for(kernel)
    if args.mode == "mc":
        rep.manifest.seed = args.seed
        _progress(args, f"sampling {args.episodes} episodes")
    r = return_time(chain, target, args.horizon, args.mode, args.episodes, args.seed)
    rep.line("target", r.target)
    rep.line("mode", r.mode)
    if r.mode == "exact":
        rep.line("tail_mass", r.tail_mass)
        rep.line("mean_lower", r.mean_lower)
        rep.line("mean", r.mean_exact if r.mean_exact is not None else "unknown")
        rep.line("tail_model", r.tail_model)
        if r.pi_estimate is not None:
            rep.line("pi", r.pi_estimate)
        rep.table("pmf", ["t", "prob"], [[t, m] for t, m in r.pmf_prefix])
    else:
        rep.line("episodes", r.episodes)
        rep.line("mean", r.mc_mean)
        rep.line("stderr", r.mc_stderr)
        rep.line("censored_fraction", r.tail_mass)


def cmd_stationary_solve(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    seed = _state(args.seed_state, kernel.dimension)
    pi = solve_stationary_exact(kernel, seed, args.max_states)
    label = "origin" if args.seed_state.strip() == "origin" else format_state(seed)
    rep.line(f"pi({label})", pi[seed])
    rep.line("class_size", len(pi))
    rep.table("pi", ["state", "pi"], [[s, p] for s, p in sorted(pi.items())])


def cmd_stationary_approx(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    cert = _load_geometric(args.cert, rep) if args.cert else None
    if cert is None and not args.heuristic:
        raise ParamError("--cert is required unless --heuristic is given")
    x0 = _state(args.x0, kernel.dimension)
    start = _state(args.start, kernel.dimension) if args.start else None
    if not args.heuristic and (args.R is None or args.rho is None):
        raise ParamError("--R and --rho are required unless --heuristic is given")
    res = approx_stationary(
        kernel, cert, x0, args.epsilon, args.R, args.rho, start, args.heuristic, args.lazy, args.max_t
    )
    rep.line("x0", x0)
    rep.line("t", res.t)
    rep.line("p_t", res.p_t)
    rep.line("lower", res.lower)
    rep.line("upper", res.upper)
    rep.line("R", res.R)
    rep.line("rho", res.rho)
    rep.line("certified", res.certified)
    rep.line("leaked", res.leaked)


def cmd_ldrate(args, rep):
    kernel = _kernel(args.kernel, rep.manifest)
    try:
        v = [parse_rational(x.strip()) for x in args.v.split(",")]
    except ValueError as exc:
        raise ParamError(f"--v: {exc}") from None
    if len(v) != kernel.dimension:
        raise ParamError(f"--v has {len(v)} entries, kernel has {kernel.dimension}")
    r = ldrate(_chain_for(kernel), v, args.n_max, args.fit_from)
    rep.line("slope", r.slope_estimate if r.slope_estimate is not None else "undefined")
    rep.line("L_minus", r.L_minus)
    rep.line("L_plus", r.L_plus)
    rep.line("infinite", r.infinite)
    if r.zero_from is not None:
        rep.line("zero_from", r.zero_from)
    rep.table("ray", ["n", "pi", "log_pi_over_n"], r.points)


def _queue(args, rep):
    rep.manifest.add_input(args.spec)
    try:
        return load_queue_spec(args.spec)
    except json.JSONDecodeError as exc:
        raise ParamError(f"{args.spec}: line {exc.lineno}: {exc.msg}") from None


def cmd_queue_load(args, rep):
    system, policy = _queue(args, rep)
    rho, stable = load_factor(system)
    rep.line("types", system.types)
    rep.line("buffers", system.n)
    rep.line("slot", system.slot)
    rep.line("rho", rho)
    rep.line("rho_below_one", stable)
    rep.table("policy", ["bits", "serve"], [[f"{b:0{system.n}b}"[::-1], k] for b, k in enumerate(policy.table)])


def cmd_queue_sim(args, rep):
    system, policy = _queue(args, rep)
    rep.manifest.seed = args.seed
    st = queue_simulate(system, policy, args.horizon, args.seed)
    rep.line("epochs", st.epochs)
    rep.line("empty_fraction", st.empty_fraction)
    rep.line("arrivals", st.arrivals)
    rep.line("departures", st.departures)
    rep.table(
        "occupancy",
        ["buffer", "mean_at_epochs", "time_average"],
        [[k + 1, float(a), float(b)] for k, (a, b) in enumerate(zip(st.mean_at_epochs, st.time_average))],
    )


def cmd_queue_embed(args, rep):
    system, policy = _queue(args, rep)
    chain = embedded_chain(system, policy)
    state = _state(args.state, system.n) if args.state else chain.empty
    rep.table("successors", ["from", "to", "prob"], [[state, s, p] for s, p in chain.successors(state)])
    if args.analyze:
        try:
            pi = solve_stationary_exact(chain, chain.empty, args.max_states)
        except StateSpaceTooLarge as exc:
            rep.line("analysis", f"class not finite within cap ({exc})")
            return
        rep.line("pi(empty)", pi[chain.empty])
        rep.line("class_size", len(pi))
        rep.table("pi", ["state", "pi"], [[s, p] for s, p in sorted(pi.items())])


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orthwalk", description="Constrained random walks on the orthant.")
    ap.add_argument("--format", choices=["text", "csv", "json-lines"], default="text")
    ap.add_argument("--quiet", action="store_true", help="no progress messages on stderr")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    walk = sub.add_parser("walk", help="kernel files").add_subparsers(dest="sub", required=True)
    p = walk.add_parser("validate")
    p.add_argument("kernel")
    p.set_defaults(func=cmd_walk_validate)
    p = walk.add_parser("simulate", help="CSV columns: t, q1..qd")
    p.add_argument("kernel")
    p.add_argument("--start", default="origin")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_walk_simulate)

    cm = sub.add_parser("cm", help="counter machines").add_subparsers(dest="sub", required=True)
    p = cm.add_parser("run")
    p.add_argument("machine")
    p.add_argument("--start", required=True, help="state,z1,z2")
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_cm_run)

    p = sub.add_parser("compile", help="machine -> walk kernel plus certificate sidecar")
    p.add_argument("machine")
    p.add_argument("--p", type=_rational)
    p.add_argument("--with-q3", action="store_true")
    p.add_argument("--C", type=_rational)
    p.add_argument("--strict-steps", action="store_true")
    p.add_argument("--deterministic", action="store_true", help="emit the deterministic walk instead")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_compile)

    ly = sub.add_parser("lyapunov", help="drift certificates").add_subparsers(dest="sub", required=True)
    p = ly.add_parser("linear", help="table columns: face, drift")
    p.add_argument("kernel")
    p.add_argument("--w", help="weights: inline list, JSON file or certificate file")
    p.add_argument("--gamma", type=_rational)
    p.set_defaults(func=cmd_lyapunov_linear)
    p = ly.add_parser("geometric", help="table columns: face, ratio")
    p.add_argument("kernel")
    p.add_argument("--from-linear", help="linear weights to convert")
    p.add_argument("--gamma", type=_rational)
    p.add_argument("--cert", help="verify an existing geometric certificate")
    p.add_argument("--delta-hi", type=float, default=10.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_lyapunov_geometric, w=None)
    p = ly.add_parser("mixing-inputs")
    p.add_argument("kernel")
    p.add_argument("--cert", required=True)
    p.set_defaults(func=cmd_lyapunov_mixing)

    st = sub.add_parser("stationary", help="return times and stationary laws").add_subparsers(
        dest="sub", required=True
    )
    p = st.add_parser("return", help="table columns: t, prob (exact mode)")
    p.add_argument("kernel")
    p.add_argument("--target", default="origin")
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_stationary_return)
    p = st.add_parser("solve", help="table columns: state, pi")
    p.add_argument("kernel")
    p.add_argument("--seed-state", default="origin")
    p.add_argument("--max-states", type=int, default=5000)
    p.set_defaults(func=cmd_stationary_solve)
    p = st.add_parser("approx")
    p.add_argument("kernel")
    p.add_argument("--cert")
    p.add_argument("--R", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--x0", default="origin")
    p.add_argument("--start")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--heuristic", action="store_true", help="fit R and rho from the transient (not certified)")
    p.add_argument("--lazy", action="store_true", help="use the lazy chain (aperiodic, same stationary law)")
    p.add_argument("--max-t", type=int, default=1_000_000)
    p.set_defaults(func=cmd_stationary_approx)

    p = sub.add_parser("ldrate", help="table columns: n, pi, log_pi_over_n")
    p.add_argument("kernel")
    p.add_argument("--v", required=True, help="direction, e.g. 0,0,1")
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--fit-from", type=int)
    p.set_defaults(func=cmd_ldrate)

    q = sub.add_parser("queue", help="single-station priority queue").add_subparsers(dest="sub", required=True)
    p = q.add_parser("load")
    p.add_argument("spec")
    p.set_defaults(func=cmd_queue_load)
    p = q.add_parser("sim")
    p.add_argument("spec")
    p.add_argument("--horizon", type=int, required=True, help="number of epochs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_queue_sim)
    p = q.add_parser("embed")
    p.add_argument("spec")
    p.add_argument("--state", help="buffer contents, default empty")
    p.add_argument("--analyze", action="store_true", help="exact stationary law if the class is finite")
    p.add_argument("--max-states", type=int, default=5000)
    p.set_defaults(func=cmd_queue_embed)
    return ap


PARAM_ERRORS = (ParamError, ValueError, WalkError, MachineError, ReductionError, PolicyError, FileNotFoundError)
RUN_ERRORS = (CheckFailed, LyapunovError, StationaryError, StuckError, DeadFaceError)


def main(argv=None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = RunManifest(argv)
    rep = Report(args.format, manifest)
    rep.outputs = []
    t0 = time.perf_counter()
    code = 0
    try:
        args.func(args, rep)
    except RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    except PARAM_ERRORS as exc:
        # validation-type errors from loaders surface as parameter errors
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest.wall_time = round(time.perf_counter() - t0, 6)
    for path in rep.outputs:
        manifest.write_sidecar(path)
    buf = io.StringIO()
    rep.emit(buf)
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
