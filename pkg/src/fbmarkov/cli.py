"""Command line front end: simulate, partition, error-report, ergodic.

Configuration precedence is flags > config file > built-in defaults; the
config file is flat ``key=value`` lines whose keys mirror the long flag
names.  Exit codes: 0 success, 1 numerical or runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import engine, ergodic, oracle, partition as part
from .errors import FbmkError
from .kernel import (
    AtomicMeasure,
    HurstKernelParams,
    PowerLawMeasure,
    check_admissibility,
    parse_measure,
)

_DEFAULTS = {
    "c_alpha": 1.0,
    "node_rule": "barycenter",
    "T": 1.0,
    "dt": 2.0 ** -8,
    "scheme": "exact",
    "seed": 0,
    "replicas": 8,
    "format": "csv",
    "grid_points": 64,
    "phi": "square",
}

_CASTS = {
    "measure": str,
    "alpha": float,
    "hurst": float,
    "eps": float,
    "c_alpha": float,
    "node_rule": str,
    "x_min": float,
    "x_max": float,
    "T": float,
    "dt": float,
    "output_dt": float,
    "scheme": str,
    "seed": int,
    "replicas": int,
    "out": str,
    "format": str,
    "grid_points": int,
    "target_n": int,
    "eps_sweep": str,
    "phi": str,
    "threshold_c": float,
    "y0": str,
}


class UsageError(Exception):
    pass


def _load_config(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from the defaults."""
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    for key, raw in config.items():
        if key not in _CASTS:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None and hasattr(args, key):
            try:
                setattr(args, key, _CASTS[key](raw))
            except ValueError as exc:
                raise UsageError(f"bad config value {key}={raw!r}") from exc
    for key, value in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    return args


def _resolve_measure(args):
    given_spec = getattr(args, "measure", None)
    alpha = getattr(args, "alpha", None)
    hurst = getattr(args, "hurst", None)
    if hurst is not None:
        if alpha is not None and abs(alpha - (hurst + 0.5)) > 1e-12:
            raise UsageError(
                f"--alpha {alpha} and --hurst {hurst} disagree (alpha = hurst + 1/2)"
            )
        alpha = hurst + 0.5
    if given_spec is not None:
        measure = parse_measure(given_spec)
        if alpha is not None and isinstance(measure, PowerLawMeasure):
            if abs(measure.alpha - alpha) > 1e-12:
                raise UsageError("--measure and --alpha/--hurst disagree")
        return measure
    if alpha is not None:
        return PowerLawMeasure(alpha=alpha)
    raise UsageError("specify a measure via --measure, --alpha, or --hurst")


def _resolve_partition(args, measure):
    if isinstance(measure, AtomicMeasure):
        return part.GeometricPartition.from_atoms(measure)
    eps = getattr(args, "eps", None)
    if eps is None:
        raise UsageError("power-law measures need --eps")
    return part.build_geometric_partition(
        measure,
        eps,
        c_alpha=args.c_alpha,
        node_rule=args.node_rule,
        x_min=getattr(args, "x_min", None),
        x_max=getattr(args, "x_max", None),
    )


def _parse_y0(args, n: int):
    raw = getattr(args, "y0", None)
    if raw is None:
        return None
    try:
        vec = [float(v) for v in str(raw).split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --y0 {raw!r}, expected comma-separated floats") from exc
    if len(vec) != n:
        raise UsageError(f"--y0 has {len(vec)} entries, partition has {n} nodes")
    return vec


def cmd_simulate(args) -> int:
    measure = _resolve_measure(args)
    partition = _resolve_partition(args, measure)
    if args.dt > args.T > 0.0:
        raise UsageError(f"--dt {args.dt} exceeds --T {args.T}")
    started = time.perf_counter()
    path = engine.simulate_path(
        partition,
        args.T,
        args.dt,
        scheme=args.scheme,
        seed=args.seed,
        y0=_parse_y0(args, partition.n),
        output_dt=getattr(args, "output_dt", None),
    )
    elapsed = time.perf_counter() - started
    out = getattr(args, "out", None)
    if out:
        if args.format == "binary":
            path.write_binary(out, n_nodes=partition.n)
        else:
            path.write_csv(out)
    else:
        sys.stdout.write("t,V\n")
        for t, v in zip(path.times, path.values):
            sys.stdout.write(f"{t:.17g},{v:.17g}\n")
    jitter = ""
    if args.scheme == "exact" and partition.n > 0:
        kernel = engine.precompute_step_kernel(partition, args.dt)
        if kernel.jitter:
            jitter = f", noise factorization used jitter {kernel.jitter:g}"
    print(
        f"simulate: {partition.n} nodes, {path.times.size} samples, "
        f"state = {partition.n} values + rng, {elapsed:.3f} s{jitter}",
        file=sys.stderr,
    )
    return 0


def _sweep_points(spec: str):
    lo_s, sep, hi_s = spec.partition(":")
    if not sep:
        raise UsageError(f"bad --eps-sweep {spec!r}, expected LO:HI")
    try:
        first, last = float(lo_s), float(hi_s)
    except ValueError as exc:
        raise UsageError(f"bad --eps-sweep {spec!r}") from exc
    if not (0.0 < first < 1.0 and 0.0 < last < 1.0):
        raise UsageError("--eps-sweep endpoints must lie in (0, 1)")
    lo10, hi10 = math.log10(first), math.log10(last)
    count = int(round(abs(hi10 - lo10))) + 1
    return np.logspace(lo10, hi10, max(count, 2))


def cmd_partition(args) -> int:
    measure = _resolve_measure(args)
    sweep = getattr(args, "eps_sweep", None)
    if sweep is not None:
        if not isinstance(measure, PowerLawMeasure):
            raise UsageError("--eps-sweep applies to power-law measures only")
        lines = ["eps,N,r,x_min,x_max"]
        for eps in _sweep_points(sweep):
            n = part.partition_cardinality(eps, measure.alpha, args.c_alpha)
            r = 1.0 + args.c_alpha * math.sqrt(eps)
            x_min = eps ** (1.0 / (1.0 - measure.alpha))
            x_max = (1.0 / eps) ** (2.0 / (2.0 * measure.alpha + 3.0))
            lines.append(f"{eps:.17g},{n},{r:.17g},{x_min:.17g},{x_max:.17g}")
        text = "\n".join(lines) + "\n"
        out = getattr(args, "out", None)
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    partition = _resolve_partition(args, measure)
    header = (
        f"# N={partition.n}"
        + (f", r={partition.ratio:.17g}" if partition.ratio is not None else "")
        + f", K=[{partition.x_min:.17g}, {partition.x_max:.17g}]"
    )
    out = getattr(args, "out", None)
    if out:
        partition.write_csv(out)
        print(header)
    else:
        print(header)
        sys.stdout.write("index,eta,c,cell_lo,cell_hi\n")
        for i in range(partition.n):
            lo, hi = (
                (partition.edges[i], partition.edges[i + 1])
                if partition.edges is not None
                else (partition.nodes[i], partition.nodes[i])
            )
            sys.stdout.write(
                f"{i},{partition.nodes[i]:.17g},{partition.weights[i]:.17g},"
                f"{lo:.17g},{hi:.17g}\n"
            )
    return 0


def cmd_error_report(args) -> int:
    measure = _resolve_measure(args)
    grid = np.linspace(args.T / args.grid_points, args.T, args.grid_points)
    target_n = getattr(args, "target_n", None)
    if target_n is not None:
        if not isinstance(measure, PowerLawMeasure):
            raise UsageError("--target-n tuning applies to power-law measures only")
        params = measure.params()
        partition, report, rel = oracle.tune_partition_nodes(
            params, target_n, args.T, grid_size=args.grid_points,
            node_rule=args.node_rule,
        )
        scale = math.sqrt(oracle.memory_variance_closed_form(params, args.T))
        print(
            f"target-n {target_n}: sup L2 error {report.sup_l2_error:.6g} "
            f"(relative {rel:.6g}, scale {scale:.6g}), "
            f"K=[{partition.x_min:.6g}, {partition.x_max:.6g}], r={partition.ratio:.6g}"
        )
    else:
        if isinstance(measure, AtomicMeasure):
            # exact representation: certify the (numerically zero) error
            partition = part.GeometricPartition.from_atoms(measure)
            report = _atomic_self_error(partition, grid)
            print(f"sup L2 error {report.sup_l2_error:.6g} (exact representation)")
        else:
            partition = _resolve_partition(args, measure)
            report = oracle.sup_l2_error(
                measure.params(), partition, grid, eps_target=args.eps
            )
            print(
                f"eps {args.eps:g}: N={partition.n}, "
                f"sup L2 error {report.sup_l2_error:.6g} "
                f"in {report.runtime_seconds:.3f} s"
            )
    out = getattr(args, "out", None)
    if out:
        report.write_csv(out)
    return 0


def _atomic_self_error(partition, grid):
    # V_pi is V itself, so err^2 = approx - 2*approx + approx = 0 up to rounding
    started = time.perf_counter()
    errors = np.empty(grid.size)
    for i, t in enumerate(grid):
        diag = oracle.approx_covariance_closed_form(partition, t, t)
        errors[i] = math.sqrt(max(diag - 2.0 * diag + diag, 0.0))
    return oracle.ErrorReport(
        eps_target=None,
        n_nodes=partition.n,
        ratio=None,
        x_min=partition.x_min,
        x_max=partition.x_max,
        grid=grid,
        l2_error=errors,
        sup_l2_error=float(np.max(errors)),
        runtime_seconds=time.perf_counter() - started,
    )


def cmd_ergodic(args) -> int:
    measure = _resolve_measure(args)
    phi = ergodic.make_phi(args.phi, c=getattr(args, "threshold_c", None))
    workers = int(os.environ.get("FBMK_THREADS", "1") or "1")
    n_nodes = len(measure.locations) if isinstance(measure, AtomicMeasure) else None
    y0 = _parse_y0(args, n_nodes) if n_nodes is not None else None
    result = ergodic.ergodic_experiment(
        measure,
        phi,
        args.T,
        args.dt,
        replicas=args.replicas,
        seed=args.seed,
        y0=y0,
        max_workers=workers,
    )
    z = result.z_score
    print(
        f"ergodic {phi.name}: estimate {result.final_estimate:.6g} "
        f"+/- {result.stderr:.3g}, target {result.target:.6g}, "
        f"z = {z:.3f}" if z is not None else "ergodic: no target"
    )
    out = getattr(args, "out", None)
    if out:
        result.write_csv(out)
    return 0


def _add_measure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measure", help="measure spec: power:ALPHA or atoms:x1*m1,...")
    p.add_argument("--alpha", type=float, help="power-law exponent (1/2 < alpha < 1)")
    p.add_argument("--hurst", type=float, help="Hurst exponent H = alpha - 1/2")
    p.add_argument("--eps", type=float, help="target precision for the partition")
    p.add_argument("--c-alpha", dest="c_alpha", type=float, help="ratio constant")
    p.add_argument(
        "--node-rule",
        dest="node_rule",
        choices=part.NODE_RULES,
        help="node placement within cells",
    )
    p.add_argument("--x-min", dest="x_min", type=float, help="override compact lower end")
    p.add_argument("--x-max", dest="x_max", type=float, help="override compact upper end")
    p.add_argument("--config", help="key=value config file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmk",
        description=(
            "Simulate long-memory Gaussian processes through a Markovian "
            "bank of Ornstein-Uhlenbeck processes, with certified L2 error."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate one output path")
    _add_measure_flags(p_sim)
    p_sim.add_argument("--T", type=float, help="time horizon")
    p_sim.add_argument("--dt", type=float, help="step size")
    p_sim.add_argument("--output-dt", dest="output_dt", type=float,
                       help="output grid spacing (multiple of dt)")
    p_sim.add_argument("--scheme", choices=engine.SCHEMES, help="update rule")
    p_sim.add_argument("--seed", type=int, help="RNG seed")
    p_sim.add_argument("--y0", help="starting vector, comma separated")
    p_sim.add_argument("--out", help="output file (stdout if omitted)")
    p_sim.add_argument("--format", choices=("csv", "binary"), help="output format")
    p_sim.set_defaults(func=cmd_simulate)

    p_part = sub.add_parser("partition", help="inspect a geometric partition")
    _add_measure_flags(p_part)
    p_part.add_argument("--eps-sweep", dest="eps_sweep",
                        help="emit N vs eps over LO:HI (decades)")
    p_part.add_argument("--out", help="write the table to a CSV file")
    p_part.set_defaults(func=cmd_partition)

    p_err = sub.add_parser("error-report", help="certified L2 error report")
    _add_measure_flags(p_err)
    p_err.add_argument("--T", type=float, help="time horizon")
    p_err.add_argument("--grid-points", dest="grid_points", type=int,
                       help="number of grid times on (0, T]")
    p_err.add_argument("--target-n", dest="target_n", type=int,
                       help="tune endpoints for the best partition of this size")
    p_err.add_argument("--out", help="write t,l2_error rows to a CSV file")
    p_err.set_defaults(func=cmd_error_report)

    p_erg = sub.add_parser("ergodic", help="time-average experiment")
    _add_measure_flags(p_erg)
    p_erg.add_argument("--phi", choices=ergodic.PHI_NAMES, help="test function")
    p_erg.add_argument("--threshold-c", dest="threshold_c", type=float,
                       help="level for phi=threshold")
    p_erg.add_argument("--T", type=float, help="time horizon")
    p_erg.add_argument("--dt", type=float, help="step size")
    p_erg.add_argument("--replicas", type=int, help="independent replicas")
    p_erg.add_argument("--seed", type=int, help="master RNG seed")
    p_erg.add_argument("--y0", help="starting vector, comma separated")
    p_erg.add_argument("--out", help="write the report to a CSV file")
    p_erg.set_defaults(func=cmd_ergodic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FbmkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
