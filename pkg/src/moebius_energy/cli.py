"""Command-line entry point.

Every subcommand writes JSON (shapes, reports) or CSV (trajectories, trial
logs) with 17 significant digits; report paths also get a PNG figure with the
same stem. Errors print one line ``ERROR <code>: message`` to stderr and exit
with status 2; an unknown subcommand exits with 64.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, compactness, io, moebius, optimize, plotting, shapes
from .curve_energy import curve_e0, curve_e_lambda
from .errors import EnergyError, FormatError, ParameterError
from .geom import ClosedCurve, SphereMesh, SurfacePatch, curve_normalize, dual_areas
from .parallel import set_threads
from .surface_energy import DistortionSummary, conformalize, regularizer, surface_e0, surface_e_lambda, willmore_term

EXIT_USAGE = 64
EXIT_ERROR = 2
COMMANDS = ("generate", "energy", "invariance", "minimize", "cover", "diskpair", "modulus", "kuiper", "holder")


class UsageError(Exception):
    def __init__(self, message: str, unknown_command: bool = False):
        super().__init__(message)
        self.unknown_command = unknown_command


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, unknown_command="invalid choice" in message and self.prog.split()[-1] not in COMMANDS)


def _emit(obj, report: str | None, figure=None) -> None:
    """Write the JSON report (or print it); ``figure(path)`` renders the PNG beside it."""
    text = io.dumps(obj, indent=1)
    if report:
        Path(report).write_text(text + "\n")
        if figure is not None:
            figure(plotting.figure_path(report))
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> None:
    kind = args.kind.replace("_", "-")
    if kind in ("circle", "ellipse", "torus-knot", "perturbed-circle"):
        params = {
            "circle": {"radius": args.radius},
            "ellipse": {"a": args.a, "b": args.b},
            "torus-knot": {"p": args.p, "q": args.q},
            "perturbed-circle": {"amp": args.amp, "mode": args.mode, "seed": args.seed},
        }[kind]
        shape = shapes.make_curve(kind, args.n, **params)
        if args.normalize:
            shape = curve_normalize(shape)
    elif kind == "annulus":
        shape = shapes.annulus(args.ratio, args.k)
    else:
        params = {
            "icosphere": {"radius": args.radius},
            "ellipsoid": {"a": args.a, "b": args.b, "c": args.c},
            "pinch": {"gap": args.gap},
            "spun-knot": {"arc": "trefoil"},
        }[kind]
        ambient = 4 if kind == "spun-knot" else args.ambient
        shape = shapes.make_sphere_mesh(kind, args.subdiv, ambient, **params)
        if args.conformalize:
            shape = conformalize(shape)
    io.write_shape(args.out, shape)


def _surface_report(m: SphereMesh, lam: float, p: float) -> dict:
    dist = DistortionSummary.of(m)
    b = surface_e_lambda(m, lam, p)
    a, _ = dual_areas(m)
    out = b.to_dict()
    out.update(
        {
            "willmore": willmore_term(m),
            "sum_domain_area": math.fsum(a),
            "max_distortion": dist.max,
            "mean_distortion": dist.mean,
            "n_vertices": m.n_vertices,
        }
    )
    return out


def cmd_energy(args) -> None:
    shape = io.read_shape(args.infile)
    if args.target == "curve":
        if not isinstance(shape, ClosedCurve):
            raise FormatError("energy curve needs a curve file")
        if args.normalize:
            shape = curve_normalize(shape)
        if args.lam is None:
            out = {"e0": curve_e0(shape, diag_correction=args.diag_correction)}
        else:
            out = curve_e_lambda(shape, args.lam, diag_correction=args.diag_correction).to_dict()
        out["n_points"] = len(shape)
    else:
        if not isinstance(shape, SphereMesh):
            raise FormatError("energy surface needs a sphere mesh file")
        if args.conformalize:
            shape = conformalize(shape)
        out = _surface_report(shape, args.lam if args.lam is not None else 1.0, args.p)
    _emit(out, args.report, lambda path: plotting.plot_shape(shape, path))


def _trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)]


def cmd_invariance(args) -> None:
    m = io.read_shape(args.infile)
    if not isinstance(m, SphereMesh):
        raise FormatError("invariance needs a sphere mesh file")
    if args.conformalize:
        m = conformalize(m)
    rows = []
    for trial, s in enumerate(_trial_seeds(args.seed, args.trials)):
        f = moebius.random_safe(s, m, args.margin)
        mt = moebius.apply_shape(f, m)
        e0 = surface_e0(mt)
        reg = regularizer(mt, args.lam, args.p)
        rows.append({"trial": trial, "e0": e0, "willmore": willmore_term(mt), "regularizer": reg, "total": e0 + reg})
    header = ["trial", "e0", "willmore", "regularizer", "total"]
    if args.report:
        io.write_csv(args.report, header, ([r[k] for k in header] for r in rows))
        plotting.plot_invariance(rows, plotting.figure_path(args.report))
    else:
        print(",".join(header))
        for r in rows:
            print(",".join(str(r[k]) if k == "trial" else io.fmt(r[k]) for k in header))


def cmd_minimize(args) -> None:
    shape = io.read_shape(args.infile)
    if isinstance(shape, ClosedCurve):
        shape = curve_normalize(shape)
    res = optimize.minimize_shape(shape, args.energy, args.lam, args.p, args.steps, args.step0)
    header = ["iter", "e0", "regularizer", "total", "step_size", "sphericity"]
    rows = [[r.iteration, r.e0, r.regularizer, r.total, r.step_size, r.sphericity] for r in res.records]
    if args.log:
        io.write_csv(args.log, header, rows)
        plotting.plot_trajectory(res.records, plotting.figure_path(args.log))
    if args.out:
        io.write_shape(args.out, res.shape)
    last = res.records[-1]
    _emit({"status": res.status, "iterations": last.iteration, "initial": res.records[0].total, "final": last.total}, None)


def cmd_cover(args) -> None:
    m = io.read_shape(args.infile)
    if not isinstance(m, SphereMesh):
        raise FormatError("cover needs a sphere mesh file")
    rep = compactness.ball_cover(m, args.delta)
    _emit(rep.to_dict(), args.report, lambda path: plotting.plot_cover(rep, path))


def cmd_diskpair(args) -> None:
    q = compactness.disk_pair_quadrature(args.r, args.eps, args.resolution)
    out = {"r": args.r, "eps": args.eps, "value": q.value, "resolution": q.resolution, "rel_change": q.rel_change}
    _emit(out, args.report, lambda path: plotting.plot_diskpair(args.r, args.eps, compactness.disk_pair_integrand, path))


def cmd_modulus(args) -> None:
    shape = io.read_shape(args.infile)
    if not isinstance(shape, (SurfacePatch, SphereMesh)):
        raise FormatError("modulus needs an annulus or mesh file")

    def loop(spec: str):
        if isinstance(shape, SurfacePatch) and spec in shape.loops:
            return shape.loops[spec]
        try:
            return [int(x) for x in spec.split(",")]
        except ValueError:
            raise ParameterError(f"unknown loop {spec!r}") from None

    if args.map:
        f = io.read_map(args.map)
        pts = shape.points if isinstance(shape, SurfacePatch) else shape.image
        moved = moebius.apply(f, pts)
        shape = shape.with_points(moved) if isinstance(shape, SurfacePatch) else shape.with_image(moved)
    mod = compactness.annulus_modulus(shape, loop(args.inner), loop(args.outer))
    _emit({"modulus": mod, "two_pi_modulus": 2.0 * math.pi * mod}, args.report, lambda path: plotting.plot_shape(shape, path))


def cmd_kuiper(args) -> None:
    m = io.read_shape(args.infile)
    if not isinstance(m, SphereMesh):
        raise FormatError("kuiper needs a sphere mesh file")
    out = {"rho": args.rho, "kuiper": compactness.kuiper_selfdistance(m, args.rho)}
    _emit(out, args.report, lambda path: plotting.plot_shape(m, path))


def cmd_holder(args) -> None:
    m = io.read_shape(args.infile)
    if not isinstance(m, SphereMesh):
        raise FormatError("holder needs a sphere mesh file")
    out = {"q_exp": args.q_exp, "quotient": compactness.gauss_holder_quotient(m, args.q_exp, seed=args.seed)}
    _emit(out, args.report, lambda path: plotting.plot_shape(m, path))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="moebius-energy", description="Moebius-invariant energies of curves and spheres.")
    top.add_argument("--version", action="version", version=__version__)
    top.add_argument("--threads", type=int, default=None, help="worker threads for pair sums (default ENERGY_THREADS or 1)")
    top.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    # the common flags are accepted before or after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a test curve, sphere mesh or annulus")
    g.add_argument(
        "kind",
        choices=["circle", "ellipse", "torus-knot", "perturbed-circle", "icosphere", "ellipsoid", "pinch", "spun-knot", "annulus"],
    )
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=128, help="curve vertices")
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--a", type=float, default=2.0)
    g.add_argument("--b", type=float, default=1.0)
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--p", type=int, default=2)
    g.add_argument("--q", type=int, default=3)
    g.add_argument("--amp", type=float, default=0.05)
    g.add_argument("--mode", type=int, default=3)
    g.add_argument("--subdiv", type=int, default=3)
    g.add_argument("--ambient", type=int, default=3, choices=[3, 4])
    g.add_argument("--gap", type=float, default=0.1)
    g.add_argument("--ratio", type=float, default=math.e)
    g.add_argument("--k", type=int, default=192, help="annulus vertices per ring")
    g.add_argument("--normalize", action="store_true", help="scale curves to length 2*pi")
    g.add_argument("--conformalize", action="store_true", help="conformalize meshes before writing")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("energy", parents=[common], help="evaluate a curve or surface energy")
    e.add_argument("target", choices=["curve", "surface"])
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--lambda", dest="lam", type=float, default=None)
    e.add_argument("--p", type=float, default=2.0)
    e.add_argument("--diag-correction", action="store_true")
    e.add_argument("--normalize", action="store_true", help="scale the curve to length 2*pi first")
    e.add_argument("--conformalize", action="store_true")
    e.add_argument("--report")
    e.set_defaults(func=cmd_energy)

    v = sub.add_parser("invariance", parents=[common], help="energies under random safe Moebius maps")
    v.add_argument("--in", dest="infile", required=True)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--margin", type=float, default=0.5)
    v.add_argument("--lambda", dest="lam", type=float, default=1.0)
    v.add_argument("--p", type=float, default=2.0)
    v.add_argument("--conformalize", action="store_true")
    v.add_argument("--report")
    v.set_defaults(func=cmd_invariance)

    mi = sub.add_parser("minimize", parents=[common], help="gradient descent on an energy")
    mi.add_argument("--in", dest="infile", required=True)
    mi.add_argument("--energy", required=True, choices=["curve-e0", "curve-elambda", "surface-e0", "surface-elambda"])
    mi.add_argument("--lambda", dest="lam", type=float, default=1.0)
    mi.add_argument("--p", type=float, default=2.0)
    mi.add_argument("--steps", type=int, default=200)
    mi.add_argument("--step0", type=float, default=None)
    mi.add_argument("--log")
    mi.add_argument("--out")
    mi.set_defaults(func=cmd_minimize)

    c = sub.add_parser("cover", parents=[common], help="greedy sheet cover of a mesh")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--delta", type=float, default=0.2)
    c.add_argument("--report")
    c.set_defaults(func=cmd_cover)

    d = sub.add_parser("diskpair", parents=[common], help="divergent integral over two parallel disks")
    d.add_argument("--r", type=float, default=1.0)
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--resolution", type=int, default=32)
    d.add_argument("--report")
    d.set_defaults(func=cmd_diskpair)

    mo = sub.add_parser("modulus", parents=[common], help="conformal modulus of an annulus")
    mo.add_argument("--in", dest="infile", required=True)
    mo.add_argument("--inner", default="loop0", help="loop name or comma-separated vertex ids")
    mo.add_argument("--outer", default="loop1")
    mo.add_argument("--map", help="Moebius map file applied to the points first")
    mo.add_argument("--report")
    mo.set_defaults(func=cmd_modulus)

    k = sub.add_parser("kuiper", parents=[common], help="normalized self-distance")
    k.add_argument("--in", dest="infile", required=True)
    k.add_argument("--rho", type=float, default=1.0)
    k.add_argument("--report")
    k.set_defaults(func=cmd_kuiper)

    h = sub.add_parser("holder", parents=[common], help="Hoelder quotient of the Gauss map")
    h.add_argument("--in", dest="infile", required=True)
    h.add_argument("--q-exp", type=float, default=0.5)
    h.add_argument("--report")
    h.set_defaults(func=cmd_holder)
    return top


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"WARNING {category.__name__}: {message}", file=sys.stderr)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        if exc.unknown_command:
            parser.print_usage(sys.stderr)
            print(f"ERROR usage: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"ERROR usage: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        set_threads(args.threads)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.simplefilter("ignore", DeprecationWarning)
            warnings.showwarning = _show_warning
            args.func(args)
    except EnergyError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"ERROR io: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"ERROR parameter: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        set_threads(None)
    return 0


def main() -> None:
    sys.exit(run())
