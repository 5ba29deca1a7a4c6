"""Parameter sweeps over ``(eps, delta, seed)`` with per-row status and rate fits.

Rows are computed independently (optionally in worker processes), buffered,
and written in the lexicographic order of the grid by a single writer. The
CSV is the source of truth; each fit also gets a two-column ``.dat`` file.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..allencahn import AC_COLUMNS, minimize_ac
from ..limits import CRITICAL_FIELD_COLUMNS, critical_fields, solve_limit_fields
from ..magnetic import quasiminimizer_report, random_smooth_state
from ..mesh import Grid, ScalarField, build_grid, grid_from_intervals, integrate, nodal_gradient
from ..pinning import (
    CellFunction,
    PinningField,
    RandomCellLaw,
    empirical_mean_drift,
    exact_mean_intervals,
    sample_periodic,
    sample_random,
)
from ..scalar import (
    REPORT_COLUMNS,
    cell_energy_gap,
    cell_minimize,
    el_residual,
    minimize_scalar,
    pinned_energy,
    report_row,
    tile_cell,
)
from .config import SweepConfig
from .rates import RateFit, fit_rate

__all__ = [
    "MIN_NODES",
    "SweepResult",
    "FitResult",
    "COLUMNS",
    "run_sweep",
    "build_pinning",
    "write_csv",
    "read_csv",
]

# resolution policy: nodes per min(eps, delta)
MIN_NODES = 8

COLUMNS = {
    "cell_rates": ("eps", "delta", "chi", "kind", "seed", "w1p_deficit", "energy_gap", "el_residual", "iters"),
    "scalar_rates": REPORT_COLUMNS,
    "symmetric_rates": REPORT_COLUMNS,
    "random_birkhoff": REPORT_COLUMNS + ("drift",),
    "magnetic_equiv": (
        "eps", "delta", "seed", "denoised", "unpinned_of_v", "ratio",
        "weighted", "sup_U_error", "sandwich_ok", "sandwich_U_ok",
    ),
    "limits_table": ("eps",) + CRITICAL_FIELD_COLUMNS,
    "allen_cahn": AC_COLUMNS,
}


@dataclass(frozen=True)
class FitResult:
    name: str
    status: str
    fit: RateFit | None = None
    points: tuple = ()


@dataclass(eq=False)
class SweepResult:
    experiment: str
    columns: tuple
    rows: list
    fits: list = field(default_factory=list)
    csv_path: Path | None = None

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if str(r["status"]).startswith("failed"))

    @property
    def skipped(self) -> int:
        return sum(1 for r in self.rows if str(r["status"]).startswith("skipped"))

    def fit(self, name: str) -> FitResult:
        for f in self.fits:
            if f.name == name:
                return f
        raise KeyError(name)


# --------------------------------------------------------------------------
# pinning and grids from config dictionaries


def _cell_from(pin: dict) -> CellFunction:
    kind = pin.get("kind", "constant")
    vals = pin.get("values", [1.0])
    sym = bool(pin.get("symmetric", False))
    if kind == "constant":
        return CellFunction.constant(vals[0] if isinstance(vals, (list, tuple)) else vals)
    if kind == "checkerboard2x2":
        return CellFunction.checkerboard(vals[0], vals[1], symmetric=sym)
    if kind == "piecewise_k":
        return CellFunction.piecewise(vals, symmetric=sym)
    if kind == "trig":
        return CellFunction.trig(pin.get("alpha", vals[0] if vals else 0.0))
    raise ValueError(f"unknown pinning kind {kind!r}")


def _is_random(pin: dict) -> bool:
    return pin.get("kind") == "random_checkerboard"


def _law_from(pin: dict) -> RandomCellLaw:
    support = pin.get("values", [0.5, 1.5])
    probs = pin.get("probabilities", [1.0 / len(support)] * len(support))
    return RandomCellLaw(tuple(support), tuple(probs))


def build_pinning(pin: dict, delta: float, seed: int, grid: Grid, eps: float | None = None) -> PinningField:
    """Periodic or random pinning from a ``pinning.*`` dictionary."""
    if _is_random(pin):
        return sample_random(_law_from(pin), delta, seed, grid, epsilon_hint=eps)
    return sample_periodic(_cell_from(pin), delta, grid, epsilon_hint=eps)


def _direct_grid(eps: float, delta: float, res: dict, dom: dict, pin: dict | None = None) -> tuple[Grid, bool]:
    """Grid for a direct solve and whether it meets the resolution policy.

    With ``resolution.n_per_unit`` the spacing is fixed; otherwise the spacing
    is ``delta / k`` with ``k`` intervals per cell, ``k`` large enough for
    ``nodes_per_min`` nodes across ``min(eps, delta)``. For periodic cells
    ``k`` is raised until the trapezoid mean of ``a`` is exact.
    """
    lx = float(dom.get("lx", 1.0))
    ly = float(dom.get("ly", lx))
    nodes = int(res.get("nodes_per_min", MIN_NODES))
    scale = min(eps, delta)
    if "n_per_unit" in res:
        g = build_grid(lx, ly, float(res["n_per_unit"]))
    else:
        k = max(int(res.get("nodes_per_delta", 1)), math.ceil(nodes * delta / scale - 1e-9))
        if pin is not None and not _is_random(pin) and "nodes_per_delta" not in res:
            k = exact_mean_intervals(_cell_from(pin), k)
        h = delta / k
        mx = max(int(round(lx / h)), 2)
        my = max(int(round(ly / h)), 2)
        g = grid_from_intervals(mx * h, my * h, mx, my)
    return g, scale / g.h >= MIN_NODES - 1e-9


def _cell_nodes(res: dict, pin: dict) -> int:
    if "nodes_per_delta" in res:
        return int(res["nodes_per_delta"])
    return exact_mean_intervals(_cell_from(pin), 32)


# --------------------------------------------------------------------------
# one row per experiment


def _row_cell(eps, delta, seed, pin, res, dom, params, tol):
    chi = delta / eps
    c = cell_minimize(_cell_from(pin), chi, _cell_nodes(res, pin), tol=tol)
    return {
        "eps": eps,
        "delta": delta,
        "chi": chi,
        "kind": pin.get("kind", "constant"),
        "seed": seed,
        "w1p_deficit": c.w1p_deficit,
        "energy_gap": cell_energy_gap(c),
        "el_residual": c.el_residual,
        "iters": c.iterations,
    }


def _row_scalar(eps, delta, seed, pin, res, dom, params, tol):
    grid, _ = _direct_grid(eps, delta, res, dom, pin)
    p = build_pinning(pin, delta, seed, grid, eps)
    s = minimize_scalar(p, eps, tol=tol)
    row = report_row(s, delta, pin.get("kind", "constant"), seed, math.sqrt(p.target_mean))
    if _is_random(pin):
        row["drift"] = empirical_mean_drift(p)
    return row


def _tiled_solution(eps, delta, pin, res, tol):
    cell = _cell_from(pin)
    c = cell_minimize(cell, delta / eps, _cell_nodes(res, pin), tol=tol)
    return cell, c


def _row_symmetric(eps, delta, seed, pin, res, dom, params, tol):
    cell, c = _tiled_solution(eps, delta, pin, res, tol)
    reps = int(dom.get("reps", 1))
    U = tile_cell(c, reps, delta)
    g = U.grid
    a = sample_periodic(cell, delta, g).values
    Mbar = math.sqrt(cell.mean)
    dev = U.values - Mbar
    gx, gy = nodal_gradient(U.values, g.h)
    return {
        "eps": eps,
        "delta": delta,
        "chi": delta / eps,
        "kind": cell.kind,
        "seed": seed,
        "sup_error": float(np.max(np.abs(dev))),
        "l2_error": math.sqrt(integrate(dev * dev, g)),
        "grad_ratio": float(eps * np.max(np.hypot(gx, gy))),
        "energy": pinned_energy(U, a, eps),
        "el_residual": el_residual(U, a, eps),
        "iters": c.iterations,
    }


def _row_magnetic(eps, delta, seed, pin, res, dom, params, tol):
    hex = float(params.get("hex", 0.0))
    lx = float(dom.get("lx", 1.0))
    reps = int(round(lx / delta))
    tileable = (
        not _is_random(pin)
        and reps >= 1
        and abs(reps * delta - lx) <= 1e-9 * lx
        and _cell_from(pin).symmetric
    )
    if tileable:
        cell, c = _tiled_solution(eps, delta, pin, res, tol)
        U = tile_cell(c, reps, delta)
        grid = U.grid
        p = sample_periodic(cell, delta, grid, epsilon_hint=eps)
    else:
        grid, _ = _direct_grid(eps, delta, res, dom, pin)
        p = build_pinning(pin, delta, seed, grid, eps)
        U = minimize_scalar(p, eps, tol=tol)
    state = random_smooth_state(grid, seed, hex, field_amp=float(params.get("field_amp", 1.0)))
    r = quasiminimizer_report(state.u, state.A, p, eps, hex, U=U)
    return {
        "eps": eps,
        "delta": delta,
        "seed": seed,
        "denoised": r.denoised,
        "unpinned_of_v": r.unpinned_of_v,
        "ratio": r.ratio,
        "weighted": r.weighted,
        "sup_U_error": r.sup_U_error,
        "sandwich_ok": int(bool(r.sandwich_ok)),
        "sandwich_U_ok": int(bool(r.sandwich_U_ok)),
    }


def _row_allen_cahn(eps, delta, seed, pin, res, dom, params, tol):
    beta = float(params.get("beta", 0.0))
    lx = float(dom.get("lx", 1.0))
    ly = float(dom.get("ly", lx))
    n = float(res.get("n_per_unit", math.ceil(int(res.get("nodes_per_min", MIN_NODES)) / min(eps, delta or eps))))
    grid = build_grid(lx, ly, n)
    p = None if delta is None or not pin else build_pinning(pin, delta, seed, grid, eps)
    s = minimize_ac(p, eps, beta, grid, init=params.get("init", "vertical"), tol=max(tol, 1e-12))
    return {
        "eps": eps,
        "delta": "" if delta is None else delta,
        "beta": beta,
        "energy": s.energy,
        "interface_length": s.interface_length,
        "per_length_constant": s.per_length_constant,
        "lagrange": s.lagrange,
    }


_ROWS = {
    "cell_rates": _row_cell,
    "scalar_rates": _row_scalar,
    "symmetric_rates": _row_symmetric,
    "random_birkhoff": _row_scalar,
    "magnetic_equiv": _row_magnetic,
    "allen_cahn": _row_allen_cahn,
}


def _resolved(experiment, eps, delta, res, dom, pin) -> bool:
    if experiment in ("cell_rates", "symmetric_rates"):
        # cell spacing is delta / n and delta <= eps in this regime
        return _cell_nodes(res, pin) * min(eps, delta) / delta >= MIN_NODES
    if experiment == "magnetic_equiv" and "n_per_unit" not in res:
        return _cell_nodes(res, pin) * min(eps, delta) / delta >= MIN_NODES
    if experiment == "allen_cahn":
        if "n_per_unit" not in res:
            return True
        return min(eps, delta or eps) * float(res["n_per_unit"]) >= MIN_NODES
    return _direct_grid(eps, delta, res, dom, pin)[1]


def _run_task(task):
    experiment, eps, delta, seed, pin, res, dom, params, tol, flag = task
    base = {"eps": eps, "delta": "" if delta is None else delta, "seed": seed}
    try:
        row = _ROWS[experiment](eps, delta, seed, pin, res, dom, params, tol)
        row["status"] = flag or "ok"
    except Exception as exc:  # failure isolation: keep sweeping
        row = dict(base)
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
    return row


# --------------------------------------------------------------------------
# fits


def _num(v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def _fit_points(name, pairs, floor) -> FitResult:
    pts = [(x, y) for x, y in pairs if math.isfinite(x) and math.isfinite(y)]
    if pts and all(abs(y) <= floor for _, y in pts):
        return FitResult(name, "degenerate", None, tuple(pts))
    pts = [(x, y) for x, y in pts if x > 0 and y > floor]
    if len(pts) < 3:
        return FitResult(name, "insufficient", None, tuple(pts))
    return FitResult(name, "ok", fit_rate(pts), tuple(pts))


def _groups(rows, key):
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r)
    return out


def _fits(experiment: str, rows: list, tol: float) -> list[FitResult]:
    # which fits apply is decided on the full grid; points come from "ok" rows
    ok = [r for r in rows if r["status"] == "ok"]
    floor = 100.0 * tol
    fits = []
    if experiment == "cell_rates":
        for eps, grp in _groups(ok, "eps").items():
            for y in ("w1p_deficit", "energy_gap"):
                fits.append(_fit_points(f"{y}~chi@eps={eps:g}", [(r["chi"], r[y]) for r in grp], floor))
    elif experiment in ("scalar_rates", "symmetric_rates"):
        for eps, grp in _groups(rows, "eps").items():
            if len({r["delta"] for r in grp}) >= 2:
                pts = [(r["delta"], r["sup_error"]) for r in grp if r["status"] == "ok"]
                fits.append(_fit_points(f"sup_error~delta@eps={eps:g}", pts, floor))
        if len({r["eps"] for r in rows}) >= 3:
            fits.append(_fit_points("sup_error~eps", [(r["eps"], r["sup_error"]) for r in ok], floor))
    elif experiment == "random_birkhoff":
        for eps, grp in _groups(ok, "eps").items():
            by_delta = _groups(grp, "delta")
            drift = [(d, float(np.mean([r["drift"] for r in g]))) for d, g in by_delta.items()]
            med = [(d, float(np.median([r["sup_error"] for r in g]))) for d, g in by_delta.items()]
            fits.append(_fit_points(f"mean_drift~delta@eps={eps:g}", drift, 0.0))
            fits.append(_fit_points(f"median_sup_error~delta@eps={eps:g}", med, floor))
    return fits


# --------------------------------------------------------------------------
# csv


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: list, columns: tuple, path=None) -> str:
    """Rows as CSV text (and to ``path`` when given); missing cells are empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _summary_text(res: SweepResult) -> str:
    counts = {}
    for r in res.rows:
        key = str(r["status"]).split(":")[0]
        counts[key] = counts.get(key, 0) + 1
    lines = [
        f"experiment {res.experiment}",
        f"rows {len(res.rows)}",
        "status " + " ".join(f"{k}={v}" for k, v in sorted(counts.items())),
        f"failures {res.failures}",
    ]
    for f in res.fits:
        if f.fit is None:
            lines.append(f"fit {f.name} status={f.status} n={len(f.points)}")
        else:
            lines.append(
                f"fit {f.name} status=ok slope={f.fit.slope!r} intercept={f.fit.intercept!r} "
                f"r2={f.fit.r2!r} n={f.fit.n_points}"
            )
    return "\n".join(lines) + "\n"


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in name)


# --------------------------------------------------------------------------
# driver


def _limits_rows(cfg: SweepConfig) -> list[dict]:
    n = int(cfg.params.get("n", 64))
    n_max = int(cfg.params.get("n_max", 3))
    restarts = int(cfg.params.get("restarts", 6))
    gamma = float(cfg.params.get("gamma", 0.0))
    try:
        lf = solve_limit_fields(build_grid(1.0, 1.0, n))
    except Exception as exc:
        return [{"eps": e, "status": f"failed: {type(exc).__name__}: {exc}"} for e in cfg.eps]
    rows = []
    for e in cfg.eps:
        try:
            for cr in critical_fields(n_max, e, lf, gamma=gamma, restarts=restarts):
                row = {"eps": e, **{c: getattr(cr, c) for c in CRITICAL_FIELD_COLUMNS}, "status": "ok"}
                rows.append(row)
        except Exception as exc:
            rows.append({"eps": e, "status": f"failed: {type(exc).__name__}: {exc}"})
    return rows


def run_sweep(
    cfg: SweepConfig,
    workers: int = 1,
    out=None,
    allow_underresolved: bool | None = None,
) -> SweepResult:
    """Run every ``(eps, delta, seed)`` cell of ``cfg`` in lexicographic order.

    Underresolved cells (fewer than eight nodes across ``min(eps, delta)``)
    are skipped unless allowed, in which case they run with status
    ``underresolved`` and stay out of the fits. With ``out`` set, the CSV,
    a summary and one ``.dat`` file per fit are written there.
    """
    allow = cfg.allow_underresolved if allow_underresolved is None else allow_underresolved
    exp = cfg.experiment
    columns = COLUMNS[exp] + ("status",)
    if exp == "limits_table":
        rows = _limits_rows(cfg)
    else:
        rules = cfg.delta_rules or [None]
        tasks, slots = [], []
        for eps in cfg.eps:
            for rule in rules:
                delta = None if rule is None else rule(eps)
                for seed in cfg.seeds:
                    flag = ""
                    try:
                        resolved = delta is None or _resolved(exp, eps, delta, cfg.resolution, cfg.domain, cfg.pinning)
                    except Exception:
                        # a broken pinning spec fails inside the row, not here
                        resolved = True
                    if not resolved:
                        if not allow:
                            slots.append({"eps": eps, "delta": delta, "seed": seed, "status": "skipped: underresolved"})
                            continue
                        flag = "underresolved"
                    slots.append(None)
                    tasks.append((exp, eps, delta, seed, cfg.pinning, cfg.resolution, cfg.domain, cfg.params, cfg.tol, flag))
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                done = list(pool.map(_run_task, tasks))
        else:
            done = [_run_task(t) for t in tasks]
        it = iter(done)
        rows = [s if s is not None else next(it) for s in slots]
    res = SweepResult(exp, columns, rows, _fits(exp, rows, cfg.tol))
    if out is not None:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        res.csv_path = d / f"{exp}.csv"
        write_csv(rows, columns, res.csv_path)
        (d / f"{exp}_summary.txt").write_text(_summary_text(res))
        for f in res.fits:
            if f.points:
                text = "".join(f"{x!r} {y!r}\n" for x, y in f.points)
                (d / f"{exp}_{_safe(f.name)}.dat").write_text(text)
    return res
