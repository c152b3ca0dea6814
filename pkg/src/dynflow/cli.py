"""Command-line entry point.

Exit status: 0 on success, 1 on usage or input errors, 2 when a
verification (``verify``, ``algebra --check``) finds a disagreement.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import algebra_checks
from . import exterior as ext
from .diffchars import DEFAULT_GRID, DEFAULT_TOL, Region, classify_flow
from .expr import DEFAULT_STEP, DSLError, parse_flow_spec
from .integral import (
    BoxInstrument,
    DEFAULT_SEGMENTS,
    circulation,
    integral_instrument_norm,
    integral_measure,
    integral_normalized_measure,
    parse_box,
    parse_curve_spec,
    parse_surface_spec,
)
from .report import Report, format_value, write_report, write_table

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors map to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(report: Report, out: str | None) -> None:
    if out:
        write_report(report, out)
    else:
        sys.stdout.write("name,value\n")
        for name, value in report.all_rows():
            sys.stdout.write(f"{name},{format_value(value)}\n")


def _start(args, command: str) -> Report:
    report = Report(command)
    report.stamp()
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command") or value is None or value is False:
            continue
        if isinstance(value, (list, tuple)):
            value = " ".join(format_value(v) for v in value)
        report.note(key, value)
    return report


def _window(text: str | None, dim: int, lo: float = -1.0, hi: float = 1.0):
    if text is None:
        return [lo] * dim, [hi] * dim
    a, b = parse_box(text)
    if len(a) != dim:
        raise UsageError(f"window has {len(a)} intervals, field dimension is {dim}")
    return a, b


# subcommands

def cmd_algebra(args) -> int:
    if args.check:
        suite = algebra_checks.run_suite(args.samples, tuple(args.dims), args.seed, args.tol)
        report = _start(args, "algebra")
        report.extend(suite.rows())
        _emit(report, args.out)
        return EXIT_OK if suite.all_pass else EXIT_VERIFY
    if args.dim is None or args.u is None or args.op is None:
        raise UsageError("algebra needs --check, or --dim, --u and --op")
    u = ext.parse_element(args.u, args.dim)
    v = ext.parse_element(args.v, args.dim) if args.v is not None else None
    if args.op in ("wedge", "dot", "cosine") and v is None:
        raise UsageError(f"--op {args.op} needs --v")
    report = _start(args, "algebra")
    if args.op == "wedge":
        w = ext.wedge(u, v)
        report.add("grade", w.grade)
        report.extend((f"e{''.join(map(str, i)) or '0'}", c) for i, c in zip(ext.basis(w.dim, w.grade), w.coeffs))
    elif args.op == "hodge":
        w = ext.hodge_dual(u)
        report.add("grade", w.grade)
        report.extend((f"e{''.join(map(str, i)) or '0'}", c) for i, c in zip(ext.basis(w.dim, w.grade), w.coeffs))
    elif args.op == "dot":
        report.add("scalar_product", ext.scalar_product(u, v))
    elif args.op == "norm":
        report.add("norm", ext.norm(u))
    elif args.op == "cosine":
        report.add("normalized_measure", ext.normalized_measure(u, v))
    _emit(report, args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    field = parse_flow_spec(_read(args.field))
    lo, hi = _window(args.box, field.dim)
    region = Region(tuple(lo), tuple(hi), (args.grid,) * field.dim)
    result = classify_flow(field, region, args.tol, args.h)
    report = _start(args, "analyze")
    report.extend(result.rows())
    _emit(report, args.out)
    if args.table:
        write_table(args.table, ("criterion", "residual", "tol", "verdict"),
                    [(k, result.residuals[k], result.tolerances[k], result.residuals[k] <= result.tolerances[k])
                     for k in result.residuals])
    return EXIT_OK


def cmd_circulate(args) -> int:
    field = parse_flow_spec(_read(args.field))
    curve = parse_curve_spec(_read(args.curve), args.segments)
    report = _start(args, "circulate")
    report.add("circulation", circulation(field, curve))
    _emit(report, args.out)
    return EXIT_OK


def cmd_flux(args) -> int:
    field = parse_flow_spec(_read(args.field))
    surface = parse_surface_spec(_read(args.surface), args.grid)
    report = _start(args, "flux")
    report.add("instrument", "box" if isinstance(surface, BoxInstrument) else "patch")
    report.add("flux", integral_measure(field, surface))
    report.add("area", integral_instrument_norm(surface))
    report.add("normalized_measure", integral_normalized_measure(field, surface))
    if args.abs:
        report.add("absolute_flux", integral_measure(field, surface, absolute=True))
    _emit(report, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .variational import SUITES

    kwargs = {}
    if args.dim is not None:
        if args.suite == "harmonic":
            raise UsageError("the harmonic suite is 2-D only")
        kwargs["dim"] = args.dim
    table = SUITES[args.suite](args.trials, seed=args.seed, tol=args.tol, **kwargs)
    report = _start(args, "verify")
    report.extend(table.summary())
    _emit(report, args.out)
    if args.table:
        write_table(args.table, ("trial", "kind", "integral", "differential", "agree"),
                    [(r.trial, r.kind, r.integral, r.differential, r.agree) for r in table.rows])
    if args.figure:
        from .plotting import plot_verdicts_svg
        plot_verdicts_svg(table, args.figure)
    print(f"{table.suite}: {table.agreed}/{len(table.rows)} agree", file=sys.stderr)
    return EXIT_OK if table.all_agree else EXIT_VERIFY


def cmd_laplace(args) -> int:
    from .diffchars import ScalarGrid
    from .variational import (
        DirichletProblem,
        boundary_mask,
        dirichlet_energy,
        parse_boundary_spec,
        relax_dirichlet,
        stationarity_probe,
    )

    g, region = parse_boundary_spec(_read(args.boundary), args.grid)
    problem = DirichletProblem.from_expr(g, region, tol=args.tol, max_iters=args.max_iters, omega=args.omega)
    result = relax_dirichlet(problem)
    u = result.grid.values
    mask = boundary_mask(u.shape)
    b = u[mask]
    exact = ScalarGrid.sample(g, region).values
    report = _start(args, "laplace")
    report.add("iterations", result.iterations)
    report.add("residual", result.residuals[-1])
    report.add("tol", args.tol)
    report.add("verdict.converged", result.residuals[-1] <= args.tol)
    report.add("verdict.residual_monotone", result.residual_monotone)
    report.add("verdict.maximum_principle",
               bool(u[~mask].min() >= b.min() and u[~mask].max() <= b.max()))
    report.add("energy", dirichlet_energy(result.grid))
    report.add("boundary_expr.max_deviation", float(np.max(np.abs(u - exact))))
    if args.probe:
        stats = stationarity_probe(result.grid, args.probe, args.magnitude, args.seed)
        report.extend(stats.rows())
        report.add("verdict.energy_strictly_increases", stats.positive == args.probe)
    _emit(report, args.out)
    if args.history:
        write_table(args.history, ("sweep", "residual"), enumerate(result.residuals))
    if args.figure:
        if region.dim != 2:
            raise UsageError("heatmap figures need a 2-D problem")
        from .plotting import plot_grid_svg
        plot_grid_svg(u, region.lo, region.hi, args.figure, title="Dirichlet solution")
    return EXIT_OK


def cmd_minsurf(args) -> int:
    from .minsurf import BoundaryLoop, area_variation_probe, relax_surface, surface_area

    curve = parse_curve_spec(_read(args.boundary))
    corners = tuple(args.corners) if args.corners else None
    loop = BoundaryLoop(curve, corners) if corners else BoundaryLoop(curve)
    if args.figure and curve.dim != 3:
        raise UsageError("wireframe figures need a surface in 3-D")
    result = relax_surface(loop, args.grid, args.tol, args.iters)
    s = result.surface
    report = _start(args, "minsurf")
    report.add("iterations", result.iterations)
    report.add("residual", result.residuals[-1])
    report.add("tol", args.tol)
    report.add("verdict.converged", result.residuals[-1] <= args.tol)
    inside = [bool(np.all((s.coords[k][~s.mask] >= s.coords[k][s.mask].min())
                          & (s.coords[k][~s.mask] <= s.coords[k][s.mask].max()))) for k in range(s.dim)]
    report.add("verdict.maximum_principle", all(inside))
    report.add("verdict.energy_monotone", result.energy_monotone())
    report.add("energy", result.energies[-1])
    report.add("area", surface_area(s))
    if args.probe:
        probe = area_variation_probe(s, args.magnitude, args.probe, args.seed)
        report.extend(probe.rows())
        energies = np.concatenate([probe.energy_coordinate, probe.energy_normal])
        report.add("verdict.energy_strictly_increases", bool(np.all(energies > 0)))
    _emit(report, args.out)
    if args.history:
        write_table(args.history, ("sweep", "residual", "energy", "area"),
                    zip(range(len(result.residuals)), result.residuals, result.energies, result.areas))
    if args.figure:
        from .plotting import plot_surface_svg
        plot_surface_svg(s.coords, args.figure, args.elev, args.azim)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_field_svg, plot_surface_svg

    if args.field:
        field = parse_flow_spec(_read(args.field))
        if field.dim != 2:
            raise UsageError(f"arrow plots need a 2-D field, got dim {field.dim}")
        lo, hi = _window(args.window, 2)
        count = plot_field_svg(field, lo, hi, args.density, args.out)
        print(f"arrows: {count}", file=sys.stderr)
        return EXIT_OK
    surface = parse_surface_spec(_read(args.surface), args.density)
    if isinstance(surface, BoxInstrument) or surface.dim != 3:
        raise UsageError("wireframe plots need a parametric surface in 3-D")
    u = np.linspace(0.0, 1.0, args.density)
    grid = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1)
    coords = np.moveaxis(surface.position(grid), -1, 0)
    plot_surface_svg(coords, args.out, args.elev, args.azim)
    return EXIT_OK


# parser

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dynflow", description="Flow calculus on Euclidean space: measures, characteristics, checks.")
    p.add_argument("--version", action="version", version=f"dynflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out_flag(sp):
        sp.add_argument("--out", help="report CSV path (default: standard output)")

    a = sub.add_parser("algebra", help="exterior algebra operations or the identity check suite")
    a.add_argument("--check", action="store_true", help="run the randomized identity suite")
    a.add_argument("--samples", type=_positive_int, default=1000, help="elements per dimension (default 1000)")
    a.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4, 5], help="dimensions to check")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--tol", type=_positive_float, default=algebra_checks.DEFAULT_TOL)
    a.add_argument("--dim", type=_positive_int, help="ambient dimension for --op")
    a.add_argument("--u", help='first element, e.g. "3*e12 + 4*e13"')
    a.add_argument("--v", help="second element")
    a.add_argument("--op", choices=("wedge", "hodge", "dot", "norm", "cosine"))
    out_flag(a)
    a.set_defaults(func=cmd_algebra)

    a = sub.add_parser("analyze", help="differential characteristics and classification of a flow")
    a.add_argument("--field", required=True, help="flow file")
    a.add_argument("--box", help="sampling box, e.g. [-1,1]x[-1,1] (default [-1,1]^n)")
    a.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID, help="nodes per axis")
    a.add_argument("--h", type=_positive_float, default=DEFAULT_STEP, help="difference step")
    a.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    a.add_argument("--table", help="verdict table CSV path")
    out_flag(a)
    a.set_defaults(func=cmd_analyze)

    a = sub.add_parser("circulate", help="circulation of a flow around a closed curve")
    a.add_argument("--field", required=True)
    a.add_argument("--curve", required=True, help="curve file")
    a.add_argument("--segments", type=_positive_int, default=DEFAULT_SEGMENTS)
    out_flag(a)
    a.set_defaults(func=cmd_circulate)

    a = sub.add_parser("flux", help="flux, area and normalized measure over a surface or box")
    a.add_argument("--field", required=True)
    a.add_argument("--surface", required=True, help="surface file")
    a.add_argument("--grid", type=_positive_int, default=64, help="cells per parameter axis")
    a.add_argument("--abs", action="store_true", help="also report the unsigned flux")
    out_flag(a)
    a.set_defaults(func=cmd_flux)

    a = sub.add_parser("verify", help="seeded integral/differential agreement suites")
    a.add_argument("--suite", required=True, choices=("stokes", "gauss", "harmonic"))
    a.add_argument("--trials", type=_positive_int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--tol", type=_positive_float, default=1e-6)
    a.add_argument("--dim", type=int, help="ambient dimension (stokes default 2, gauss default 3)")
    a.add_argument("--table", help="per-trial verdict table CSV path")
    a.add_argument("--figure", help="SVG scatter of residual pairs")
    out_flag(a)
    a.set_defaults(func=cmd_verify)

    a = sub.add_parser("laplace", help="Dirichlet problem by Gauss-Seidel relaxation")
    a.add_argument("--boundary", required=True, help="boundary-data file")
    a.add_argument("--grid", type=_positive_int, default=65, help="nodes per axis")
    a.add_argument("--tol", type=_positive_float, default=1e-8)
    a.add_argument("--omega", type=float, default=1.0, help="relaxation factor in (0, 2)")
    a.add_argument("--max-iters", type=_positive_int, default=200_000)
    a.add_argument("--probe", type=int, default=0, help="random perturbations for the energy check")
    a.add_argument("--magnitude", type=_positive_float, default=1e-3)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--history", help="residual history CSV path")
    a.add_argument("--figure", help="SVG heatmap path (2-D only)")
    out_flag(a)
    a.set_defaults(func=cmd_laplace)

    a = sub.add_parser("minsurf", help="harmonic relaxation of a surface spanning a closed curve")
    a.add_argument("--boundary", required=True, help="closed curve file (dim 3 or 4)")
    a.add_argument("--grid", type=_positive_int, default=64, help="parameter cells per side (M)")
    a.add_argument("--tol", type=_positive_float, default=1e-8)
    a.add_argument("--iters", type=_positive_int, default=200_000, help="maximum sweeps")
    a.add_argument("--corners", type=float, nargs=4, help="curve parameters of the square corners")
    a.add_argument("--probe", type=int, default=0, help="perturbation trials for the area probe")
    a.add_argument("--magnitude", type=_positive_float, default=1e-3)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--history", help="residual/energy/area history CSV path")
    a.add_argument("--figure", help="SVG wireframe path")
    a.add_argument("--elev", type=float, default=30.0)
    a.add_argument("--azim", type=float, default=-60.0)
    out_flag(a)
    a.set_defaults(func=cmd_minsurf)

    a = sub.add_parser("plot", help="SVG arrow plot of a planar flow or wireframe of a surface")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--field")
    src.add_argument("--surface")
    a.add_argument("--window", help="plot window for fields, e.g. [-1,1]x[-1,1]")
    a.add_argument("--density", type=_positive_int, default=12, help="nodes per axis")
    a.add_argument("--elev", type=float, default=30.0)
    a.add_argument("--azim", type=float, default=-60.0)
    a.add_argument("--out", required=True, help="SVG path")
    a.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DSLError, ext.AlgebraError, ValueError, OSError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"dynflow {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
