"""Command-line front end: ``heleshaw {boundary,moments,simulate,compare,beurling}``.

Exit codes: 0 success, 2 invalid parameters or input, 3 step cap reached
(the partial cluster is still written, flagged ``truncated``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
import tempfile

import numpy as np

from . import lattice, maps, moments, shapes
from .special import ConvergenceError, DomainError

#: Every tunable default in one place; ``heleshaw <cmd> --help`` shows them too.
DEFAULTS = {
    "boundary.n": 1024,
    "moments.nmax": 3,
    "moments.radial_nodes": 256,
    "moments.angular_nodes": 256,
    "simulate.rotors": "north",
    "simulate.walk_cap": lattice.DEFAULT_WALK_CAP,
    "simulate.pass_variant": "land",
    "simulate.sandpile_eps": 1e-6,
    "simulate.sandpile_max_sweeps": 10**6,
    "compare.map_samples": 4096,
    "compare.grid": 1024,
    "beurling.model": "idla",
    "beurling.base_seed": 0,
}

WORKERS_ENV = "HELESHAW_WORKERS"

EXIT_OK, EXIT_USAGE, EXIT_TRUNCATED = 0, 2, 3


class UsageError(Exception):
    """Bad flag value; the message starts with the flag name."""


def atomic_write(path: str, data) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    mode = "wb" if isinstance(data, bytes) else "w"
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from None


def build_map(name: str, b: float | None) -> tuple[maps.ConformalMapModel, float]:
    fixed = {"negaxis": 1.0, "halfplane": 0.5, "doubled": 2.0}
    if name in fixed:
        if b is not None and not math.isclose(b, fixed[name]):
            raise UsageError(f"--b: map {name} has b = {fixed[name]:g}, got {b:g}")
        b = fixed[name]
        model = {"negaxis": maps.make_negaxis_map, "halfplane": maps.make_halfplane_map,
                 "doubled": maps.make_doubled_map}[name]()
        return model, b
    if b is None:
        raise UsageError("--b: required for --map angle")
    if not 0 < b <= 1:
        raise UsageError(f"--b: angle maps need 0 < b <= 1, got {b:g}")
    return maps.make_angle_map(b), b


def _boundary_csv(theta, pts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "x", "y"])
    for t, z in zip(theta, pts):
        w.writerow([f"{t:.15g}", f"{z.real:.15g}", f"{z.imag:.15g}"])
    return buf.getvalue()


def cmd_boundary(args) -> int:
    if args.n < 3:
        raise UsageError(f"--n: need at least 3 samples, got {args.n}")
    model, _ = build_map(args.map, args.b)
    theta, pts = maps.boundary_sample(model, args.n)
    atomic_write(args.out, _boundary_csv(theta, pts))
    return EXIT_OK


def cmd_moments(args) -> int:
    if args.nmax < 1:
        raise UsageError(f"--nmax: must be at least 1, got {args.nmax}")
    if args.p is not None and not 0 <= args.p <= 1:
        raise UsageError(f"--p: must lie in [0, 1], got {args.p:g}")
    model, b = build_map(args.map, args.b)
    try:
        grid = moments.QuadratureGrid(args.radial_nodes, args.angular_nodes)
    except ValueError as exc:
        raise UsageError(f"--radial-nodes/--angular-nodes: {exc}") from None
    table = moments.moment_suite(model, b, args.nmax, args.p, grid)
    if args.out.endswith(".json"):
        atomic_write(args.out, json.dumps(table.to_json(), indent=2, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["exponent", "with_log", "value", "error_estimate"])
        for r in table.rows:
            w.writerow([f"{r.exponent:.15g}", int(r.with_log), f"{r.value:.15g}", f"{r.error_estimate:.6g}"])
        atomic_write(args.out, buf.getvalue())
    for r, zero in zip(table.rows, table.expected_zero):
        flag = "" if zero else "  (not expected to vanish)"
        print(f"s={r.exponent:.6g}{' log' if r.with_log else ''}: value={r.value:.3e} "
              f"relative={r.relative:.3e}{flag}")
    return EXIT_OK


def _parse_bc(text: str, model: str, p: float | None) -> lattice.BoundaryCondition:
    if model == "kpr":
        if p is None:
            raise UsageError("--p: required for --model kpr")
        if text not in ("none", "kpr") and not text.startswith("kpr"):
            raise UsageError(f"--bc: model kpr fixes the boundary rule, got {text!r}")
        text = f"kpr:{p}"
    try:
        return lattice.BoundaryCondition.parse(text)
    except ValueError as exc:
        raise UsageError(f"--bc: {exc}") from None


def cmd_simulate(args) -> int:
    if args.N < 1:
        raise UsageError(f"--N: must be at least 1, got {args.N}")
    if args.p is not None and not 0 <= args.p <= 1:
        raise UsageError(f"--p: must lie in [0, 1], got {args.p:g}")
    bc = _parse_bc(args.bc, args.model, args.p)
    if args.model == "sandpile":
        try:
            state = lattice.run_divisible_sandpile(float(args.N), bc, args.eps, args.max_sweeps)
        except ValueError as exc:
            raise UsageError(f"--bc: {exc}") from None
        cluster = state.to_cluster()
        status = EXIT_OK
    else:
        seed = args.seed
        if seed is None and not (args.model == "rotor" and args.rotors != "random"):
            seed = secrets.randbits(63)
            print(f"no --seed given; using {seed}", file=sys.stderr)
        kw = dict(walk_cap=args.walk_cap, total_cap=args.total_cap,
                  pass_variant=args.pass_variant, axis_settle=not args.no_axis_settle)
        status = EXIT_OK
        try:
            if args.model == "rotor":
                cluster = lattice.run_rotor_router(args.N, bc, args.rotors, seed or 0, **kw)
            else:
                name = "KPR" if args.model == "kpr" else "IDLA"
                cluster = lattice.run_idla(args.N, bc, seed, model=name, **kw)
        except lattice.StepCapExceeded as exc:
            print(f"step cap reached: {exc}", file=sys.stderr)
            cluster = exc.cluster
            status = EXIT_TRUNCATED
        except ValueError as exc:
            raise UsageError(f"--bc/--rotors: {exc}") from None
    atomic_write(args.out, cluster.dumps())
    if args.pbm:
        img, _ = cluster.raster()
        h, w = img.shape
        atomic_write(args.pbm, f"P4\n{w} {h}\n".encode() + np.packbits(img, axis=1).tobytes())
    print(f"model={cluster.model} N={cluster.survivors} emitted={cluster.emitted}"
          f"{' truncated' if cluster.truncated else ''}")
    return status


def cmd_compare(args) -> int:
    clusters = []
    for path in args.cluster:
        try:
            clusters.append(lattice.LatticeCluster.load(path))
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"--cluster: cannot read {path}: {exc}") from None
    model, b = build_map(args.map, args.b)
    try:
        if len(clusters) == 1:
            shape_a = shapes.normalize_cluster(clusters[0], mirror=args.mirror)
        else:
            shape_a = shapes.normalize_cluster(shapes.majority_cluster(clusters), mirror=args.mirror)
            shape_a.label = f"majority of {len(clusters)} {clusters[0].model} runs"
    except shapes.ShapeError as exc:
        raise UsageError(f"--cluster: {exc}") from None
    shape_b = shapes.normalize_map_region(model, b, args.n)
    seeds = sorted(c.seed for c in clusters if c.seed is not None)
    report = shapes.compare_shapes(shape_a, shape_b, seeds, grid=args.grid)
    atomic_write(args.out, report.dumps())
    if args.svg:
        atomic_write(args.svg, shapes.overlay_svg(shape_a, shape_b))
    print(f"sym_diff={report.sym_diff:.4f} hausdorff={report.hausdorff:.4f} grid={report.grid}")
    return EXIT_OK


def _parse_ns(text) -> list[int]:
    items = []
    for chunk in text:
        items.extend(p for p in chunk.split(",") if p)
    try:
        return [int(x) for x in items]
    except ValueError:
        raise UsageError(f"--Ns: expected integers, got {text}") from None


def cmd_beurling(args) -> int:
    ns = _parse_ns(args.Ns)
    if len(set(ns)) < 3:
        raise UsageError("--Ns: need at least 3 distinct values to fit a slope")
    if any(n < 1 for n in ns):
        raise UsageError("--Ns: values must be positive")
    if args.seeds < 3:
        raise UsageError(f"--seeds: need at least 3, got {args.seeds}")
    bc = _parse_bc(args.bc, "idla", None)
    fit = lattice.beurling_fit(ns, args.seeds, bc, args.model, args.base_seed, workers=worker_count())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "mean_emitted", "stderr"])
    for n, m, e in zip(fit.Ns, fit.mean_emitted, fit.stderr):
        w.writerow([n, f"{m:.10g}", f"{e:.6g}"])
    lo, hi = fit.ci95
    w.writerow(["slope", f"{fit.slope:.6f}", f"{fit.slope_stderr:.6f}"])
    atomic_write(args.out, buf.getvalue())
    print(f"slope={fit.slope:.3f} ci95=[{lo:.3f}, {hi:.3f}]")
    return EXIT_OK


class _Formatter(argparse.HelpFormatter):
    """Show the default of every optional flag, with or without help text."""

    def _get_help_string(self, action):
        text = action.help or ""
        if action.required or action.default in (None, argparse.SUPPRESS) or not action.option_strings:
            return text
        if isinstance(action, argparse._StoreTrueAction):
            return text
        return f"{text} (default: %(default)s)".strip()


def build_parser() -> argparse.ArgumentParser:
    fmt = _Formatter
    parser = argparse.ArgumentParser(prog="heleshaw", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)
    map_names = ["negaxis", "angle", "halfplane", "doubled"]

    p = sub.add_parser("boundary", help="sample a region boundary to CSV", formatter_class=fmt)
    p.add_argument("--map", choices=map_names, required=True, help="conformal map family")
    p.add_argument("--b", type=float, default=None, help="angle parameter (required for angle)")
    p.add_argument("--n", type=int, default=DEFAULTS["boundary.n"], help="arc samples")
    p.add_argument("--out", required=True, help="output path")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("moments", help="harmonic moment table (CSV, or JSON for .json)", formatter_class=fmt)
    p.add_argument("--map", choices=map_names, required=True, help="conformal map family")
    p.add_argument("--b", type=float, default=None, help="angle parameter (implied by fixed maps)")
    p.add_argument("--nmax", type=int, default=DEFAULTS["moments.nmax"], help="largest n in the table")
    p.add_argument("--p", type=float, default=None, help="use exponents n +- arccos(p)/(2 pi)")
    p.add_argument("--radial-nodes", type=int, default=DEFAULTS["moments.radial_nodes"],
                   help="Gauss-Legendre nodes in r (refined once)")
    p.add_argument("--angular-nodes", type=int, default=DEFAULTS["moments.angular_nodes"],
                   help="Gauss-Legendre nodes in theta (refined once)")
    p.add_argument("--out", required=True, help="output path")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", help="run a lattice aggregation model", formatter_class=fmt)
    p.add_argument("--model", choices=["idla", "rotor", "sandpile", "kpr"], required=True,
                   help="aggregation model")
    p.add_argument("--bc", default="none",
                   help="none | negaxis | angle:<b> | killreflect | kpr:<p>")
    p.add_argument("--N", type=int, required=True, help="survivors (total mass for sandpile)")
    p.add_argument("--seed", type=int, default=None, help="recorded in the output; random if omitted")
    p.add_argument("--p", type=float, default=None, help="pass probability for --model kpr")
    p.add_argument("--rotors", choices=["north", "symmetric", "random"], default=DEFAULTS["simulate.rotors"],
                   help="initial rotor state")
    p.add_argument("--walk-cap", type=int, default=DEFAULTS["simulate.walk_cap"], help="steps per walk")
    p.add_argument("--total-cap", type=int, default=None, help="steps per run")
    p.add_argument("--pass-variant", choices=["land", "skip"], default=DEFAULTS["simulate.pass_variant"],
                   help="a passing particle lands on the axis or skips to the row above")
    p.add_argument("--no-axis-settle", action="store_true", help="forbid settling on the reflecting axis")
    p.add_argument("--eps", type=float, default=DEFAULTS["simulate.sandpile_eps"], help="sandpile toppling threshold")
    p.add_argument("--max-sweeps", type=int, default=DEFAULTS["simulate.sandpile_max_sweeps"],
                   help="sandpile sweep cap")
    p.add_argument("--pbm", default=None, help="also write a PBM bitmap")
    p.add_argument("--out", required=True, help="output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare cluster(s) with a map region", formatter_class=fmt)
    p.add_argument("--cluster", nargs="+", required=True, help="several files are merged by majority vote")
    p.add_argument("--map", choices=map_names, required=True, help="conformal map family")
    p.add_argument("--b", type=float, default=None, help="angle parameter (implied by fixed maps)")
    p.add_argument("--n", type=int, default=DEFAULTS["compare.map_samples"], help="map boundary samples")
    p.add_argument("--grid", type=int, default=DEFAULTS["compare.grid"], help="initial raster size")
    p.add_argument("--mirror", action="store_true", help="reflect the cluster x -> -x")
    p.add_argument("--svg", default=None)
    p.add_argument("--out", required=True, help="output path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("beurling", help="fit log(emitted) against log(N)", formatter_class=fmt)
    p.add_argument("--Ns", nargs="+", required=True, help="sizes, space or comma separated")
    p.add_argument("--seeds", type=int, required=True, help="runs per N")
    p.add_argument("--bc", default="negaxis", help="boundary rule, as for simulate")
    p.add_argument("--model", choices=["idla", "rotor"], default=DEFAULTS["beurling.model"],
                   help="rotor uses random initial rotors per seed")
    p.add_argument("--base-seed", type=int, default=DEFAULTS["beurling.base_seed"],
                   help="run seeds are derived from this, N and the run index")
    p.add_argument("--out", required=True, help="output path")
    p.set_defaults(func=cmd_beurling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"heleshaw {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ConvergenceError, shapes.ShapeError) as exc:
        print(f"heleshaw {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
