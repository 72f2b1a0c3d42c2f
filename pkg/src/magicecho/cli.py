"""Command-line frontend.

Subcommands: lattice-info (cluster geometry and moments), run (compile and
execute a pulse program, or sweep echo amplitude vs burst length), thermo
(memory-kernel inverse-temperature model), dump-operator (matrix elements
as CSV), verify (fast invariant suite).

Times on the command line and in files are microseconds; half-cycle counts
parameterize burst lengths. Exit codes: 0 success, 1 numerical failure
(non-convergence, invariant violation), 2 configuration error.

A config file (--config, line-oriented key=value matching the long flag
names) supplies defaults; explicit flags win over it, it wins over the
built-in defaults.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__, engine, experiments, operators as ops
from . import output, pulseprog, thermo
from .errors import ConvergenceError, InvariantViolation
from .lattice import (BULK_SUM_RADIUS, Orientation, build_cluster,
                      bulk_second_moment, local_field, second_moment)

TOLERANCES = {
    "hermiticity": engine.HERMITICITY_TOL,
    "unitarity": engine.UNITARITY_TOL,
    "segment_drift": engine.SEGMENT_DRIFT_TOL,
    "time_ordered_exp": engine.TEXP_TOL,
    "thermo_step": thermo.STEP_TOL,
}


# ----------------------------------------------------------- plumbing

def _resolved_config(args) -> dict:
    # "out" is recorded separately as the manifest's output field
    skip = {"handler", "subcommand", "sequence_flag", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _finish(args, t_start, columns=None, meta=None, obj=None,
            cluster=None) -> int:
    """Emit the result to --out or stdout, plus a manifest for files."""
    out = getattr(args, "out", None)
    if out:
        if obj is not None:
            rows = output.emit_csv(obj, out)
        else:
            rows = output.write_csv(out, columns, meta)
        manifest = {
            "artifact_version": __version__,
            "command": args.subcommand,
            "config": _resolved_config(args),
            "cluster_hash": getattr(cluster, "hash_hex", None),
            "rows": rows,
            "output": os.path.basename(out),
            "tolerances": TOLERANCES,
            "wall_time_s": time.perf_counter() - t_start,
        }
        output.write_manifest(out, manifest)
    else:
        if obj is not None:
            columns, meta = output.object_columns(obj)
        sys.stdout.write(output.csv_text(columns, meta))
    return 0


def _cluster_from_args(args):
    orientation = Orientation.from_spec(args.orientation)
    return build_cluster(orientation, radius=args.radius,
                         max_sites=args.max_sites)


def _add_cluster_flags(p, radius=1.0, max_sites=None):
    p.add_argument("--orientation", default="100",
                   help="field orientation: 100, 110, 111, or x,y,z "
                        "(default %(default)s)")
    p.add_argument("--radius", type=float, default=radius,
                   help="lattice ball radius in units of the spacing "
                        "(default %(default)s)")
    p.add_argument("--max-sites", type=int, default=max_sites,
                   help="truncate the cluster to this many sites "
                        "(default %(default)s)")


def _parse_t1_grid(text: str) -> np.ndarray:
    """START:STOP:STEP in half-cycle counts, e.g. 2:40:2hc."""
    s = text.strip().lower()
    if s.endswith("hc"):
        s = s[:-2]
    parts = s.split(":")
    if len(parts) != 3:
        raise ValueError(f"t1 grid {text!r} must be START:STOP:STEP "
                         f"half-cycle counts, e.g. 2:40:2hc")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start or start < 0:
        raise ValueError(f"t1 grid {text!r} must have 0 <= START <= STOP "
                         f"and STEP > 0")
    return np.arange(start, stop + 0.5 * step, step)


# --------------------------------------------------------- subcommands

def _cmd_lattice_info(args) -> int:
    t0 = time.perf_counter()
    cluster = _cluster_from_args(args)
    m2c = second_moment(cluster)
    m2b = bulk_second_moment(cluster.orientation, radius=args.radius)
    gamma = cluster.constants.gamma
    # small shells can sit exactly at the magic angle for one orientation,
    # so the headline anisotropy ratio uses at least the calibration radius
    r_ratio = max(args.radius, BULK_SUM_RADIUS)
    ratio = (bulk_second_moment(Orientation.from_spec("100"), r_ratio)
             / bulk_second_moment(Orientation.from_spec("111"), r_ratio))
    fmt = output.CSV_FLOAT_FORMAT
    meta = {
        "orientation": cluster.orientation.label,
        "radius": fmt % args.radius,
        "n_sites": str(cluster.n_sites),
        "cluster_hash": cluster.hash_hex,
        "m2_cluster": fmt % m2c,
        "m2_bulk": fmt % m2b,
        "local_field_cluster_gauss": fmt % (np.sqrt(m2c / 3.0) / gamma),
        "local_field_bulk_gauss": fmt % (np.sqrt(m2b / 3.0) / gamma),
        "m2_ratio_100_111": fmt % ratio,
    }
    pos = cluster.positions
    columns = {"site": np.arange(len(pos), dtype=float),
               "x": pos[:, 0], "y": pos[:, 1], "z": pos[:, 2]}
    return _finish(args, t0, columns=columns, meta=meta, cluster=cluster)


def _resolve_sequence(args):
    name = args.sequence_flag or args.sequence
    if not name:
        raise ValueError("a pulse program is required: a .pp file path or "
                         "builtin:{seq1,seq2,rpw}")
    return name


def _cmd_run(args) -> int:
    t0 = time.perf_counter()
    source = _resolve_sequence(args)
    cluster = _cluster_from_args(args)
    gamma = cluster.constants.gamma
    if args.omega1_gauss is not None and not args.omega1_gauss > 0:
        raise ValueError("--omega1-gauss must be positive")
    if args.t1_grid is not None:
        if not source.startswith("builtin:"):
            raise ValueError("t1 sweeps support builtin sequences only")
        name = source[len("builtin:"):]
        if name not in ("seq1", "seq2"):
            raise ValueError(f"t1 sweeps support builtin:seq1 and "
                             f"builtin:seq2, not {source!r}")
        omega1 = gamma * args.omega1_gauss
        counts = _parse_t1_grid(args.t1_grid)
        window = args.window_us * 1e-6 if args.window_us else None
        step = args.step_us * 1e-6 if args.step_us else None
        curve = experiments.sweep_t1(name, cluster, omega1,
                                     counts * np.pi / omega1,
                                     ideal_reversal=args.ideal,
                                     window=window, step=step)
        return _finish(args, t0, obj=curve, cluster=cluster)
    if source.startswith("builtin:"):
        name = source[len("builtin:"):]
        text = pulseprog.builtin_program(
            name, amplitude_gauss=args.omega1_gauss,
            halfcycles=args.halfcycles,
            window_us=args.window_us if args.window_us else 60.0,
            step_us=args.step_us if args.step_us else 0.5,
            gamma=gamma)
    else:
        with open(source, "r") as fh:
            text = fh.read()
    program = pulseprog.parse(text)
    plan = pulseprog.compile(program, cluster, ideal_reversal=args.ideal)
    acquires = sum(isinstance(s, engine.Acquire) for s in plan.segments)
    if acquires != 1:
        raise ValueError("CSV output needs a program with exactly one "
                         "acquire statement")
    state = engine.initial_state(plan.initial_state_kind, cluster)
    _, (curve,) = engine.evolve(state, plan)
    meta = dict(curve.meta)
    meta.update({"sequence": source, "ideal_reversal": args.ideal,
                 "orientation": cluster.orientation.label,
                 "cluster_hash": cluster.hash_hex,
                 "n_sites": cluster.n_sites, "macroscopic": False})
    curve = engine.SignalCurve(times=curve.times, values=curve.values,
                               observable=curve.observable,
                               start=curve.start,
                               label=curve.label or "signal", meta=meta)
    return _finish(args, t0, obj=curve, cluster=cluster)


def _parse_cluster_spec(spec: str):
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"cluster spec {spec!r} must be "
                         f"ORIENTATION:RADIUS[:MAX_SITES]")
    orientation = Orientation.from_spec(parts[0])
    radius = float(parts[1])
    max_sites = int(parts[2]) if len(parts) == 3 else None
    return build_cluster(orientation, radius=radius, max_sites=max_sites)


def _cmd_thermo(args) -> int:
    t0 = time.perf_counter()
    cluster = None
    if args.kernel_from_cluster:
        cluster = _parse_cluster_spec(args.kernel_from_cluster)
        m2c = second_moment(cluster)
        tau_max = (args.kernel_tau_us * 1e-6 if args.kernel_tau_us
                   else 6.0 / np.sqrt(m2c))
        tau = np.linspace(0.0, tau_max, args.kernel_samples)
        kernel = thermo.microscopic_kernel(cluster, tau,
                                           offset=args.offset_us * 1e-6)
    else:
        if not args.orientation:
            raise ValueError("--orientation or --kernel-from-cluster "
                             "is required")
        kernel = thermo.gaussian_kernel_for_orientation(
            args.orientation, n=args.n, m_ratio=args.m_ratio,
            offset=args.offset_us * 1e-6)
    traj = thermo.solve_beta(kernel, args.t_end_us * 1e-6,
                             args.step_us * 1e-6)
    if args.divergence:
        # the unitary ideal-reversal prediction is flat at the ideal
        # amplitude; the memory-kernel model decays. Emit both.
        model = thermo.amplitude_curve(traj)
        fmt = output.CSV_FLOAT_FORMAT
        meta = {"ideal_amplitude": fmt % 1.0, "macroscopic": "True",
                "method": traj.method, "label": "divergence",
                "kernel": kernel.kind}
        meta.update({str(k): str(v) for k, v in kernel.meta.items()})
        columns = {"t1_us": traj.times * 1e6,
                   "model_amplitude": model.values,
                   "ideal_amplitude": np.ones_like(model.values)}
        return _finish(args, t0, columns=columns, meta=meta, cluster=cluster)
    # record which kernel produced this trajectory
    columns, meta = output.object_columns(traj)
    meta["kernel"] = kernel.kind
    meta.update({str(k): str(v) for k, v in kernel.meta.items()})
    return _finish(args, t0, columns=columns, meta=meta, cluster=cluster)


_OPERATOR_BUILDERS = {
    "ix": lambda a, w1: ops.collective("x", a.shape[0]),
    "iy": lambda a, w1: ops.collective("y", a.shape[0]),
    "iz": lambda a, w1: ops.collective("z", a.shape[0]),
    "hd": lambda a, w1: ops.secular_dipolar(a),
    "h2": lambda a, w1: ops.nonsecular_pair_raising(a)[0],
    "hm2": lambda a, w1: ops.nonsecular_pair_raising(a)[1],
    "p": lambda a, w1: ops.nonsecular_pair_raising(a)[2],
    "q": lambda a, w1: ops.operator_q(a),
    "h1": lambda a, w1: ops.magnus_first_correction(a, w1)[0],
}


def _cmd_dump_operator(args) -> int:
    t0 = time.perf_counter()
    cluster = _cluster_from_args(args)
    omega1 = cluster.constants.gamma * args.omega1_gauss
    matrix = _OPERATOR_BUILDERS[args.name](cluster.couplings, omega1)
    rows, cols = np.nonzero(matrix)
    meta = {"name": args.name, "dim": str(matrix.shape[0]),
            "n_sites": str(cluster.n_sites),
            "orientation": cluster.orientation.label,
            "cluster_hash": cluster.hash_hex}
    if args.name == "h1":
        meta["omega1"] = output.CSV_FLOAT_FORMAT % omega1
    columns = {"row": rows.astype(float), "col": cols.astype(float),
               "re": matrix[rows, cols].real, "im": matrix[rows, cols].imag}
    return _finish(args, t0, columns=columns, meta=meta, cluster=cluster)


# --------------------------------------------------------------- verify

def _check_rotation_unitarity(rng):
    for axis in "xyz":
        u = ops.rotation(axis, rng.uniform(-np.pi, np.pi), 3)
        assert np.abs(u @ u.conj().T - np.eye(8)).max() < 1e-12


def _random_couplings(rng, n):
    a = rng.normal(scale=1e4, size=(n, n))
    a = a + a.T
    np.fill_diagonal(a, 0.0)
    return a


def _check_tilt_decomposition(rng):
    for _ in range(20):
        a = _random_couplings(rng, int(rng.integers(2, 6)))
        report = ops.tilt_decompose(a, rng.uniform(0.0, np.pi))
        assert report.residual < 1e-10 * report.reference_norm


def _check_conserved_commutators(rng):
    a = _random_couplings(rng, 4)
    hd = ops.secular_dipolar(a)
    h2, _, _ = ops.nonsecular_pair_raising(a)
    q = ops.operator_q(a)
    iz = ops.collective("z", 4)
    scale = np.abs(hd).max()
    assert np.abs(ops.commutator(hd, iz)).max() < 1e-12 * scale
    assert np.abs(ops.commutator(iz, h2) - 2.0 * h2).max() < 1e-12 * scale
    assert np.abs(ops.commutator(iz, ops.commutator(iz, q))
                  - q).max() < 1e-12 * scale


def _check_pair_fid(rng):
    a0 = 1.0e5
    pair = np.array([[0.0, a0], [a0, 0.0]])
    t = np.linspace(0.0, 3e-4, 31)
    assert np.abs(experiments.fid_values(pair, t)
                  - np.cos(0.75 * a0 * t)).max() < 1e-12


def _check_ideal_rpw(rng):
    cluster = build_cluster("100", radius=1.0, max_sites=4)
    curve = experiments.rpw_magic_echo(cluster, 1.0e6, 1.3e-5,
                                       ideal_reversal=True)
    assert abs(curve.values[0] - 1.0) < 1e-9


def _check_ideal_ratio(rng):
    cluster = build_cluster("100", radius=1.0, max_sites=4)
    a1 = experiments.sequence1_amplitude(cluster, 1.0e6, 1.0e-5,
                                         ideal_reversal=True)
    a2 = experiments.sequence2_amplitude(cluster, 1.0e6, 1.0e-5,
                                         ideal_reversal=True)
    assert abs(a2 / a1 - 2.0) < 1e-9


def _check_magnus_order(rng):
    cluster = build_cluster("100", radius=1.0, max_sites=4)
    report = engine.verify_average_hamiltonian(cluster,
                                               10.0 * local_field(cluster))
    assert report["err1"] < report["err0"]


def _check_reversal_identity(rng):
    a = np.zeros((3, 3))
    u = engine.effective_propagator_a3(a, 1.0e6, 2 * np.pi / 1.0e6)
    assert np.abs(u.matrix - np.eye(8)).max() < 1e-9


def _check_thermo_cosine(rng):
    g = (2 * np.pi * 4.0e3) ** 2
    kernel = thermo.KernelSpec("tabulated", times=np.array([0.0, 1.0]),
                               values=np.array([g, g]))
    t_end = 4 * np.pi / np.sqrt(g)
    traj = thermo.solve_beta(kernel, t_end, t_end / 50)
    assert np.abs(traj.beta - np.cos(np.sqrt(g) * traj.times)).max() < 1e-6


def _check_csv_roundtrip(rng):
    import tempfile
    values = rng.normal(size=8)
    times = np.linspace(0.0, 1.0, 8)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "roundtrip.csv")
        output.write_csv(path, {"t": times, "v": values}, {"k": "v"})
        meta, cols = output.read_csv(path)
        assert meta["k"] == "v"
        assert np.abs(cols["v"] - values).max() < 1e-11 * np.abs(values).max()


VERIFY_CHECKS = [
    ("rotation-unitarity", _check_rotation_unitarity),
    ("tilt-decomposition", _check_tilt_decomposition),
    ("conserved-commutators", _check_conserved_commutators),
    ("pair-fid", _check_pair_fid),
    ("ideal-rpw-echo", _check_ideal_rpw),
    ("ideal-amplitude-ratio", _check_ideal_ratio),
    ("magnus-first-order", _check_magnus_order),
    ("reversal-identity", _check_reversal_identity),
    ("thermo-cosine-oracle", _check_thermo_cosine),
    ("csv-roundtrip", _check_csv_roundtrip),
]


def _cmd_verify(args) -> int:
    failures = 0
    for name, check in VERIFY_CHECKS:
        rng = np.random.default_rng(args.seed)
        try:
            check(rng)
        except Exception as exc:  # report every failing check, then exit 1
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok {name}")
    if failures:
        print(f"{failures} of {len(VERIFY_CHECKS)} checks failed")
        return 1
    print(f"all {len(VERIFY_CHECKS)} checks passed")
    return 0


# ----------------------------------------------------- parser assembly

def build_parser():
    parser = argparse.ArgumentParser(
        prog="magicecho",
        description="Exact density-matrix laboratory for dipolar "
                    "time-reversal echoes in small spin-1/2 clusters.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)
    registry = {}

    def sub(name, handler, **kwargs):
        p = subs.add_parser(name, **kwargs)
        p.add_argument("--config", metavar="FILE",
                       help="key=value defaults file; explicit flags win")
        p.set_defaults(handler=handler)
        registry[name] = p
        return p

    p = sub("lattice-info", _cmd_lattice_info,
            help="cluster sites, second moments, local fields")
    _add_cluster_flags(p, radius=2.0)
    p.add_argument("--out", help="write CSV here (default: stdout)")

    p = sub("run", _cmd_run,
            help="run a pulse program, or sweep amplitude vs burst length")
    p.add_argument("sequence", nargs="?",
                   help="pulse program: .pp file or builtin:{seq1,seq2,rpw}")
    p.add_argument("--sequence", dest="sequence_flag", metavar="SEQUENCE",
                   help="alternative to the positional argument")
    _add_cluster_flags(p, radius=1.0, max_sites=6)
    p.add_argument("--omega1-gauss", type=float, default=25.3,
                   help="burst field amplitude in Gauss (default %(default)s)")
    p.add_argument("--halfcycles", type=int, default=40,
                   help="builtin program burst length, total half-cycles "
                        "(default %(default)s)")
    p.add_argument("--t1-grid", metavar="A:B:Chc",
                   help="sweep burst lengths over half-cycle counts "
                        "START:STOP:STEP (e.g. 2:40:2hc) instead of "
                        "emitting one signal")
    p.add_argument("--ideal", action="store_true",
                   help="replace bursts with the exact reversed evolution")
    p.add_argument("--window-us", type=float, default=None,
                   help="acquisition window (default: 5/omega_L)")
    p.add_argument("--step-us", type=float, default=None,
                   help="acquisition step (default: 0.02/omega_L)")
    p.add_argument("--out", help="write CSV here (default: stdout)")

    p = sub("thermo", _cmd_thermo,
            help="memory-kernel model for the inverse spin temperature")
    p.add_argument("--orientation", default=None,
                   help="field orientation with tabulated second moment")
    p.add_argument("--n", type=float, default=thermo.DEFAULT_N,
                   help="kernel amplitude factor (default %(default)s)")
    p.add_argument("--m-ratio", type=float, default=thermo.DEFAULT_M_RATIO,
                   help="kernel curvature as a fraction of M2 "
                        "(default %(default)s)")
    p.add_argument("--offset-us", type=float, default=80.0,
                   help="onset delay (default %(default)s)")
    p.add_argument("--t-end-us", type=float, required=True,
                   help="trajectory length")
    p.add_argument("--step-us", type=float, default=2.0,
                   help="initial solver step (default %(default)s)")
    p.add_argument("--kernel-from-cluster", metavar="ORIENT:RADIUS[:SITES]",
                   help="compute the kernel microscopically from a cluster")
    p.add_argument("--kernel-tau-us", type=float, default=None,
                   help="microscopic kernel table extent")
    p.add_argument("--kernel-samples", type=int, default=97,
                   help="microscopic kernel table size (default %(default)s)")
    p.add_argument("--divergence", action="store_true",
                   help="also emit the flat ideal-reversal prediction")
    p.add_argument("--out", help="write CSV here (default: stdout)")

    p = sub("dump-operator", _cmd_dump_operator,
            help="matrix elements of a named operator as row,col,re,im")
    p.add_argument("--name", required=True,
                   choices=sorted(_OPERATOR_BUILDERS))
    _add_cluster_flags(p, radius=1.0, max_sites=4)
    p.add_argument("--omega1-gauss", type=float, default=25.3,
                   help="burst field for the h1 correction "
                        "(default %(default)s)")
    p.add_argument("--out", help="write CSV here (default: stdout)")

    p = sub("verify", _cmd_verify, help="run the fast invariant suite")
    p.add_argument("--seed", type=int, default=20260819,
                   help="RNG seed for the randomized properties "
                        "(default %(default)s)")

    return parser, registry


def _load_config_file(path: str) -> dict:
    values = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"{path}:{lineno}: expected key=value, "
                                 f"got {line!r}")
            values[key.strip()] = value.strip()
    return values


def _apply_config(parser, registry, argv):
    """Install config-file values as subcommand defaults (flags still win)."""
    if "--config" not in " ".join(argv):
        return
    subcommand = next((tok for tok in argv if not tok.startswith("-")), None)
    if subcommand not in registry:
        return
    sub = registry[subcommand]
    path = None
    for k, tok in enumerate(argv):
        if tok == "--config":
            if k + 1 >= len(argv):
                parser.error("--config needs a file argument")
            path = argv[k + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    try:
        raw = _load_config_file(path)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    except ValueError as exc:
        parser.error(str(exc))
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in raw.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("help", "config"):
            parser.error(f"unknown config key {key!r} for {subcommand!r}")
        action = actions[dest]
        if isinstance(action, (argparse._StoreTrueAction,
                               argparse._StoreFalseAction)):
            defaults[dest] = text.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(text)
            except ValueError:
                parser.error(f"config key {key!r}: bad value {text!r}")
        else:
            defaults[dest] = text
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    _apply_config(parser, registry, argv)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConvergenceError, InvariantViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError,
            pulseprog.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
