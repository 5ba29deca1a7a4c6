"""Command line entry point ``pinnedgl``.

Every solve subcommand prints one CSV table to stdout; ``--out DIR`` also
writes it to ``DIR`` together with field dumps. Exit status is 0 on success,
1 on a hard error and 2 when a sweep finished with failed rows.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .allencahn import AC_COLUMNS, minimize_ac
from .lab.config import load_config
from .lab.rates import fit_rate
from .lab.sweep import COLUMNS, build_pinning, read_csv, run_sweep, write_csv
from .limits import CRITICAL_FIELD_COLUMNS, critical_fields, solve_limit_fields
from .magnetic import gl_energy, minimize_gl, save_state, vortex_imprint, vorticity
from .mesh import build_grid, dump_field
from .pinning import CellFunction, exact_mean_intervals
from .scalar import REPORT_COLUMNS, cell_energy_gap, cell_minimize, minimize_scalar, report_row, tile_cell

EXIT_OK, EXIT_ERROR, EXIT_FAILURES = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--out", default=d(None), help="output directory")
    parser.add_argument("--workers", type=int, default=d(1), help="worker processes for sweeps")
    parser.add_argument("--tol", type=float, default=d(1e-10), help="solver tolerance")
    parser.add_argument("--seed", type=int, default=d(0), help="random seed")
    parser.add_argument(
        "--allow-underresolved", action="store_true", default=d(False),
        help="run cells below 8 nodes per min(eps, delta) and flag them",
    )


def _pinning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", default="checkerboard2x2",
                   choices=["constant", "checkerboard2x2", "trig", "random_checkerboard"])
    p.add_argument("--values", type=float, nargs="+", default=[0.5, 1.5])
    p.add_argument("--symmetric", action="store_true", help="mirror-symmetric cell layout")
    p.add_argument("--alpha", type=float, default=0.5, help="amplitude of the trig cell")


def _pin_dict(a) -> dict:
    return {"kind": a.kind, "values": list(a.values), "symmetric": a.symmetric, "alpha": a.alpha}


def _cell(a) -> CellFunction:
    if a.kind == "constant":
        return CellFunction.constant(a.values[0])
    if a.kind == "trig":
        return CellFunction.trig(a.alpha)
    if a.kind == "checkerboard2x2":
        return CellFunction.checkerboard(a.values[0], a.values[1], symmetric=a.symmetric)
    raise _UsageError(f"cell problems need a periodic kind, got {a.kind!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pinnedgl", description="Pinned Ginzburg-Landau numerical laboratory")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("cell", "solve the unit-cell problem")
    _pinning_flags(p)
    p.add_argument("--chi", type=float, required=True, help="delta/eps")
    p.add_argument("--n", type=int, default=None, help="intervals per cell")

    p = add("scalar", "solve the pinned scalar problem on a square")
    _pinning_flags(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--lx", type=float, default=1.0)
    p.add_argument("--n-per-unit", type=float, default=None)

    p = add("tile", "tile a symmetric cell solution and report it")
    _pinning_flags(p)
    # tiling only works for mirror-symmetric cells
    p.set_defaults(symmetric=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--reps", type=int, default=4)
    p.add_argument("--n", type=int, default=None, help="intervals per cell")

    p = add("magnetic", "relax a vortex state of the magnetic functional")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--hex", type=float, default=0.0)
    p.add_argument("--n", type=int, default=64, help="intervals per unit length")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--pinned", action="store_true", help="use a symmetric checkerboard at delta")
    p.add_argument("--delta", type=float, default=None)
    _pinning_flags(p)

    p = add("limits", "first critical fields table")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--n", type=int, default=64, help="grid intervals of the unit square")
    p.add_argument("--gamma", type=float, default=0.0)

    p = add("ac", "pinned Allen-Cahn minimizer with fixed mean")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--n", type=int, default=201, help="intervals per unit length")
    p.add_argument("--init", default="vertical", choices=["vertical", "tilted", "diagonal"])
    p.add_argument("--delta", type=float, default=None, help="pinning period; a = 1 when absent")
    _pinning_flags(p)

    p = add("sweep", "run a sweep config")
    p.add_argument("config")

    p = add("fit", "log-log fit of two CSV columns")
    p.add_argument("csv")
    p.add_argument("xcol")
    p.add_argument("ycol")
    return parser


def _emit(rows, columns, args, name) -> None:
    text = write_csv(rows, columns)
    sys.stdout.write(text)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{name}.csv").write_text(text)


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_cell(args) -> int:
    cell = _cell(args)
    n = args.n or exact_mean_intervals(cell, 32)
    c = cell_minimize(cell, args.chi, n, tol=args.tol)
    row = {
        "eps": 1.0 / args.chi, "delta": 1.0, "chi": args.chi, "kind": cell.kind, "seed": "",
        "w1p_deficit": c.w1p_deficit, "energy_gap": cell_energy_gap(c),
        "el_residual": c.el_residual, "iters": c.iterations, "status": "ok",
    }
    _emit([row], COLUMNS["cell_rates"] + ("status",), args, "cell")
    if (d := _outdir(args)) is not None:
        dump_field(c.Uhat, d / "cell_U.txt")
    return EXIT_OK


def cmd_scalar(args) -> int:
    if args.n_per_unit is None:
        k = math.ceil(8 * args.delta / min(args.eps, args.delta) - 1e-9)
        if args.kind != "random_checkerboard":
            k = exact_mean_intervals(_cell(args), max(k, 8))
        npu = k / args.delta
    else:
        npu = args.n_per_unit
    grid = build_grid(args.lx, args.lx, npu)
    status = "ok"
    if min(args.eps, args.delta) / grid.h < 8 - 1e-9:
        if not args.allow_underresolved:
            raise _UsageError("underresolved: fewer than 8 nodes per min(eps, delta); pass --allow-underresolved")
        status = "underresolved"
    p = build_pinning(_pin_dict(args), args.delta, args.seed, grid, args.eps)
    for w in p.warnings:
        print(f"warning: {w}", file=sys.stderr)
    s = minimize_scalar(p, args.eps, tol=args.tol)
    row = report_row(s, args.delta, args.kind, args.seed, math.sqrt(p.target_mean))
    row["status"] = status
    _emit([row], REPORT_COLUMNS + ("status",), args, "scalar")
    if (d := _outdir(args)) is not None:
        dump_field(s.U, d / "scalar_U.txt")
    return EXIT_OK


def cmd_tile(args) -> int:
    cell = _cell(args)
    n = args.n or exact_mean_intervals(cell, 32)
    c = cell_minimize(cell, args.delta / args.eps, n, tol=args.tol)
    U = tile_cell(c, args.reps, args.delta)
    dev = U.values - math.sqrt(cell.mean)
    row = {
        "eps": args.eps, "delta": args.delta, "reps": args.reps, "nx": U.grid.nx,
        "sup_error": float(np.max(np.abs(dev))), "status": "ok",
    }
    _emit([row], ("eps", "delta", "reps", "nx", "sup_error", "status"), args, "tile")
    if (d := _outdir(args)) is not None:
        dump_field(U, d / "tile_U.txt")
    return EXIT_OK


def cmd_magnetic(args) -> int:
    grid = build_grid(1.0, 1.0, args.n)
    p = None
    if args.pinned:
        if args.delta is None:
            raise _UsageError("--pinned needs --delta")
        p = build_pinning(_pin_dict(args), args.delta, args.seed, grid, args.eps)
    init = vortex_imprint(grid, [(0.5, 0.5)], [args.degree], args.eps, args.hex)
    s = minimize_gl(p, args.eps, args.hex, grid, init=init, max_sweeps=args.max_sweeps)
    e = gl_energy(s, p, args.eps)
    r = min(0.25, 10 * args.eps)
    rep = vorticity(s, [((0.5, 0.5), r)])
    row = {
        "eps": args.eps, "hex": args.hex, "kinetic": e.kinetic, "potential": e.potential,
        "field": e.field, "total": e.total, "circulation": rep.ball_sums[0].circulation,
        "sweeps": s.sweeps, "status": "ok",
    }
    cols = ("eps", "hex", "kinetic", "potential", "field", "total", "circulation", "sweeps", "status")
    _emit([row], cols, args, "magnetic")
    if (d := _outdir(args)) is not None:
        save_state(s, d / "magnetic_state.txt", args.eps, args.delta, args.kind if p else "none", args.seed)
    return EXIT_OK


def cmd_limits(args) -> int:
    lf = solve_limit_fields(build_grid(1.0, 1.0, args.n))
    rows = []
    for cr in critical_fields(args.n_max, args.eps, lf, gamma=args.gamma):
        row = {c: getattr(cr, c) for c in CRITICAL_FIELD_COLUMNS}
        row["status"] = "ok"
        rows.append(row)
    _emit(rows, CRITICAL_FIELD_COLUMNS + ("status",), args, "limits")
    return EXIT_OK


def cmd_ac(args) -> int:
    grid = build_grid(1.0, 1.0, args.n)
    p = None if args.delta is None else build_pinning(_pin_dict(args), args.delta, args.seed, grid, args.eps)
    s = minimize_ac(p, args.eps, args.beta, grid, init=args.init, tol=max(args.tol, 1e-12))
    row = {
        "eps": args.eps, "delta": "" if args.delta is None else args.delta, "beta": args.beta,
        "energy": s.energy, "interface_length": s.interface_length,
        "per_length_constant": s.per_length_constant, "lagrange": s.lagrange, "status": "ok",
    }
    _emit([row], AC_COLUMNS + ("status",), args, "ac")
    if (d := _outdir(args)) is not None:
        dump_field(s.u, d / "ac_u.txt")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.output
    res = run_sweep(cfg, workers=args.workers, out=out, allow_underresolved=args.allow_underresolved or None)
    sys.stdout.write(write_csv(res.rows, res.columns))
    summary = Path(out) / f"{cfg.experiment}_summary.txt"
    sys.stderr.write(summary.read_text())
    return EXIT_FAILURES if res.failures else EXIT_OK


def cmd_fit(args) -> int:
    rows = read_csv(args.csv)
    if rows and args.xcol not in rows[0] or rows and args.ycol not in rows[0]:
        raise _UsageError(f"columns {args.xcol!r}/{args.ycol!r} not found in {args.csv}")
    if rows and "status" in rows[0]:
        rows = [r for r in rows if r["status"] == "ok"]
    pairs = [(float(r[args.xcol]), float(r[args.ycol])) for r in rows]
    f = fit_rate(pairs)
    sys.stdout.write("slope,intercept,r2,n_points\n")
    sys.stdout.write(f"{f.slope!r},{f.intercept!r},{f.r2!r},{f.n_points}\n")
    return EXIT_OK


COMMANDS = {
    "cell": cmd_cell,
    "scalar": cmd_scalar,
    "tile": cmd_tile,
    "magnetic": cmd_magnetic,
    "limits": cmd_limits,
    "ac": cmd_ac,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        msg = str(exc)
        print(msg if msg.startswith("pinnedgl") else f"pinnedgl: error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:
        print(f"pinnedgl: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
