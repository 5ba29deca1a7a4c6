"""The positive minimizer of the pinned scalar energy, the unit-cell problem,
tiling of symmetric cells and the substitution identity ``E(Uv) = E(U) + ...``.

The discrete energy is ``½ Σ_edges |DU|² + (1/4ε²) Σ W (a - U²)²``; its exact
gradient is ``-W (ΔU + ε⁻² U (a - U²))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import (
    ComplexField,
    Grid,
    NeumannSpectralSolver,
    ScalarField,
    build_grid,
    covariant_kinetic,
    field_energy,
    gradient_energy,
    grid_from_intervals,
    integrate,
    laplacian_matrix,
    neumann_laplacian,
    nodal_gradient,
    trapezoid_weights,
)
from .pinning import CellFunction, PinningField, sample_periodic

__all__ = [
    "ConvergenceError",
    "ScalarSolve",
    "CellSolve",
    "ScalarDiagnostics",
    "pinned_energy",
    "el_residual",
    "minimize_scalar",
    "cell_minimize",
    "cell_energy_gap",
    "tile_cell",
    "decomposition_residual",
    "scalar_diagnostics",
    "REPORT_COLUMNS",
    "report_row",
]

DEFAULT_TOL = 1e-10
MAX_NEWTON = 200
MAX_FLOW = 100_000
_ARMIJO_C = 1e-4
_ENERGY_SLACK = 1e-13
_MAX_REJECTIONS = 5
_FLOW_BURST = 50


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_residual: float):
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


def _values(a) -> np.ndarray:
    if isinstance(a, PinningField):
        return a.values
    if isinstance(a, (ScalarField, ComplexField)):
        return a.values
    return np.asarray(a)


def pinned_energy(u, a, eps: float, grid: Grid | None = None) -> float:
    """``½∫|∇u|² + (1/4ε²)∫(a - |u|²)²`` for real or complex ``u``."""
    if grid is None:
        grid = u.grid
    uv = _values(u)
    av = _values(a)
    pot = np.sum(trapezoid_weights(grid) * (av - np.abs(uv) ** 2) ** 2)
    return gradient_energy(uv, grid) + float(pot) / (4 * eps * eps)


def el_residual(U, a, eps: float) -> float:
    """``max |-ε² ΔU - U (a - U²)|``; the ε²-scaled Euler-Lagrange defect."""
    g = U.grid
    u = _values(U)
    av = _values(a)
    lap = neumann_laplacian(ScalarField(g, u - u.mean())).values
    return float(np.max(np.abs(-eps * eps * lap - u * (av - u * u))))


@dataclass(eq=False)
class ScalarSolve:
    U: ScalarField
    energy: float
    el_residual: float
    iterations: int
    grad_sup: float
    sup_error: float
    eps: float
    flow_steps: int = 0
    energy_history: list = field(default_factory=list, repr=False)
    bounds: tuple[float, float] = (0.0, math.inf)


class _Problem:
    """Energy, gradient and Newton steps in the form ``U = c + w``.

    Keeping the large constant ``c`` out of the difference operators avoids
    cancellation when ``ε²/h²`` is big.
    """

    def __init__(self, a: np.ndarray, eps: float, grid: Grid):
        self.a = a
        self.eps2 = eps * eps
        self.grid = grid
        self.W = trapezoid_weights(grid)
        self._L = None
        self._spec = None

    @property
    def L(self) -> sp.csr_matrix:
        if self._L is None:
            self._L = laplacian_matrix(self.grid)
        return self._L

    @property
    def spec(self) -> NeumannSpectralSolver:
        if self._spec is None:
            self._spec = NeumannSpectralSolver(self.grid.shape, self.grid.h)
        return self._spec

    def energy(self, c: float, w: np.ndarray) -> float:
        u = c + w
        pot = float(np.sum(self.W * (self.a - u * u) ** 2))
        return gradient_energy(w, self.grid) + pot / (4 * self.eps2)

    def defect(self, c: float, w: np.ndarray) -> np.ndarray:
        """``-ε² Δw - U (a - U²)``, which vanishes at critical points."""
        u = c + w
        lap = neumann_laplacian(ScalarField(self.grid, w)).values
        return -self.eps2 * lap - u * (self.a - u * u)

    def newton_step(self, c: float, w: np.ndarray, f: np.ndarray) -> np.ndarray:
        u = c + w
        coef = 3 * u * u - self.a
        cmin, cmax = float(coef.min()), float(coef.max())
        if cmin > 0:
            step = self._pcg(coef, -f, math.sqrt(cmin * cmax))
            if step is not None:
                return step
        jac = (-self.eps2 * self.L + sp.diags(coef.ravel())).tocsc()
        return spla.spsolve(jac, -f.ravel()).reshape(self.grid.shape)

    def _pcg(self, coef: np.ndarray, rhs: np.ndarray, cbar: float):
        """CG on the W-symmetrised Jacobian, preconditioned by a DCT solve."""
        shape = self.grid.shape
        W = self.W

        def matvec(x):
            x = x.reshape(shape)
            lap = neumann_laplacian(ScalarField(self.grid, x)).values
            return (W * (-self.eps2 * lap + coef * x)).ravel()

        def precond(r):
            return self.spec.solve(r.reshape(shape) / W, cbar, self.eps2).ravel()

        n = W.size
        A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        M = spla.LinearOperator((n, n), matvec=precond, dtype=float)
        x, info = spla.cg(A, (W * rhs).ravel(), rtol=1e-12, atol=0.0, M=M, maxiter=500)
        if info != 0:
            return None
        return x.reshape(shape)

    def flow(self, c: float, w: np.ndarray, steps: int, stab: float, tau: float = 1.0):
        """Linearly implicit flow ``(1/τ + S - ε²Δ) U⁺ = (1/τ + S) U + U(a - U²)``.

        With ``1/τ + S`` above the Lipschitz constant of the reaction term the
        update is order preserving, so the bounds of ``U`` survive every step.
        """
        alpha = 1.0 / tau + stab
        u = c + w
        for _ in range(steps):
            rhs = alpha * u + u * (self.a - u * u)
            u = self.spec.solve(rhs, alpha, self.eps2)
        c_new = float(np.mean(u))
        return c_new, u - c_new


def minimize_scalar(
    p,
    eps: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_NEWTON,
    init: np.ndarray | float | None = None,
    max_flow_steps: int = MAX_FLOW,
) -> ScalarSolve:
    """Positive minimizer of the pinned scalar energy with Neumann conditions.

    ``p`` is a :class:`PinningField` or a :class:`ScalarField` of ``a`` values.
    Damped Newton with an Armijo test on the energy; steps leaving the band
    ``[min(m, √m), max(M, √M)]`` are halved. After five rejected trials a burst
    of a stable semi-implicit flow is run before Newton resumes.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    afield = p.field if isinstance(p, PinningField) else p
    grid = afield.grid
    a = afield.values
    amin, amax = float(a.min()), float(a.max())
    if amin <= 0:
        raise ValueError("pinning values must be positive")
    lo = min(amin, math.sqrt(amin))
    hi = max(amax, math.sqrt(amax))
    prob = _Problem(a, eps, grid)
    W = prob.W

    if init is None:
        # constant a is solved exactly by sqrt(a); skip the quadrature roundoff
        mean_a = amax if amin == amax else integrate(afield) / grid.area
        c, w = math.sqrt(mean_a), np.zeros(grid.shape)
    else:
        u0 = np.broadcast_to(np.asarray(init, float), grid.shape)
        if u0.min() < lo or u0.max() > hi:
            raise ValueError(f"initial guess must lie in [{lo}, {hi}]")
        c = float(np.mean(u0))
        w = u0 - c

    def inside(u):
        return u.min() >= lo - 1e-14 and u.max() <= hi + 1e-14

    energy = prob.energy(c, w)
    history = [energy]
    f = prob.defect(c, w)
    res = float(np.max(np.abs(f)))
    newton_its = 0
    flow_steps = 0
    stab = max(3 * hi * hi - amin, 0.0)

    while res > tol:
        if newton_its >= max_iter:
            raise ConvergenceError(f"no convergence after {newton_its} Newton steps", res)
        newton_its += 1
        step = prob.newton_step(c, w, f)
        # the W-gradient of the energy is f / ε²
        slope = float(np.sum(W * f * step)) / prob.eps2
        t = 1.0
        accepted = False
        for _ in range(_MAX_REJECTIONS):
            w_new = w + t * step
            if inside(c + w_new):
                e_new = prob.energy(c, w_new)
                slack = _ENERGY_SLACK * max(abs(energy), 1.0)
                if e_new <= energy + _ARMIJO_C * t * min(slope, 0.0) + slack:
                    accepted = True
                    break
            t *= 0.5
        if accepted:
            w = w_new
            energy = e_new
        else:
            if flow_steps >= max_flow_steps:
                raise ConvergenceError("flow budget exhausted", res)
            burst = min(_FLOW_BURST, max_flow_steps - flow_steps)
            c, w = prob.flow(c, w, burst, stab)
            flow_steps += burst
            energy = prob.energy(c, w)
        history.append(energy)
        f = prob.defect(c, w)
        res = float(np.max(np.abs(f)))

    U = ScalarField(grid, c + w)
    gx, gy = nodal_gradient(U.values, grid.h)
    target = math.sqrt(integrate(afield) / grid.area)
    if isinstance(p, PinningField):
        target = math.sqrt(p.target_mean)
    return ScalarSolve(
        U=U,
        energy=energy,
        el_residual=res,
        iterations=newton_its,
        grad_sup=float(np.max(np.hypot(gx, gy))),
        sup_error=float(np.max(np.abs(U.values - target))),
        eps=float(eps),
        flow_steps=flow_steps,
        energy_history=history,
        bounds=(lo, hi),
    )


# --------------------------------------------------------------------------
# unit cell


@dataclass(eq=False)
class CellSolve:
    Uhat: ScalarField
    chi: float
    ell: float
    w1p_deficit: float
    cell: CellFunction
    energy: float
    el_residual: float
    iterations: int

    @property
    def n(self) -> int:
        return self.Uhat.grid.nx - 1


def cell_minimize(
    cell: CellFunction, chi: float, n_per_unit: int, tol: float = DEFAULT_TOL
) -> CellSolve:
    """Solve ``-ΔÛ = χ² Û (a0 - Û²)`` on the unit square with Neumann data.

    This is the pinned scalar problem on ``[0, 1]²`` with ``ε = 1/χ``. Odd
    ``n_per_unit`` keeps nodes off the jumps of piecewise cells.
    """
    if not chi > 0:
        raise ValueError("chi must be positive: at chi = 0 every constant is a minimizer")
    grid = build_grid(1.0, 1.0, n_per_unit)
    p = sample_periodic(cell, 1.0, grid)
    s = minimize_scalar(p, 1.0 / chi, tol=tol)
    ell = integrate(s.U)
    dev = s.U.values - ell
    deficit = math.sqrt(integrate(dev * dev, grid) + 2 * gradient_energy(s.U))
    return CellSolve(s.U, float(chi), ell, deficit, cell, s.energy, s.el_residual, s.iterations)


def cell_energy_gap(c: CellSolve) -> float:
    """``Ê(√mean a0) - Ê(Û)``, nonnegative by minimality."""
    g = c.Uhat.grid
    a = sample_periodic(c.cell, 1.0, g).values
    const = np.full(g.shape, math.sqrt(c.cell.mean))
    return pinned_energy(const, a, 1.0 / c.chi, g) - pinned_energy(c.Uhat, a, 1.0 / c.chi)


def tile_cell(c: CellSolve, reps: int, delta: float) -> ScalarField:
    """Periodic copy of a symmetric cell solution onto the ``reps·δ`` square.

    For a mirror-symmetric cell the periodic and the even extension agree, so
    the result solves the pinned problem with ``ε = δ/χ`` on the big square.
    """
    if not c.cell.symmetric:
        raise ValueError("tiling needs a mirror-symmetric cell; opposite traces may differ")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = c.n
    idx = np.arange(reps * n + 1) % n
    idx[-1] = n
    vals = c.Uhat.values[np.ix_(idx, idx)]
    grid = grid_from_intervals(reps * delta, reps * delta, reps * n, reps * n)
    return ScalarField(grid, vals)


# --------------------------------------------------------------------------
# substitution identity


def decomposition_residual(
    u: ComplexField,
    A: tuple | None,
    U: ScalarField,
    p,
    eps: float,
    hex: float = 0.0,
) -> float:
    """``|E(u, A) - [E(U) + ½∫U²|∇v - iAv|² + (1/4ε²)∫U⁴(1-|v|²)² + field]|``.

    ``v = u / U``. Without ``A`` the magnetic-free version is evaluated and
    ``hex`` is ignored. Both sides use the module quadratures; the weight
    ``U²`` enters the kinetic term through its edge average.
    """
    grid = U.grid
    Uv = U.values
    if Uv.min() <= 0:
        raise ValueError("U must be positive to form v = u / U")
    uv = u.values
    a = _values(p.field if isinstance(p, PinningField) else p)
    W = trapezoid_weights(grid)
    v = uv / Uv
    a1 = a2 = None
    fe = 0.0
    if A is not None:
        a1, a2 = (_values(x) for x in A)
        fe = field_energy(a1, a2, hex, grid)
    lhs = (
        covariant_kinetic(uv, a1, a2, grid)
        + float(np.sum(W * (a - np.abs(uv) ** 2) ** 2)) / (4 * eps * eps)
        + fe
    )
    rhs = (
        pinned_energy(Uv, a, eps, grid)
        + covariant_kinetic(v, a1, a2, grid, node_weight=Uv * Uv)
        + float(np.sum(W * Uv**4 * (1 - np.abs(v) ** 2) ** 2)) / (4 * eps * eps)
        + fe
    )
    return abs(lhs - rhs)


# --------------------------------------------------------------------------
# diagnostics and reports


@dataclass(frozen=True)
class ScalarDiagnostics:
    sup_error: float
    grad_bound_ratio: float
    l2_error: float


def scalar_diagnostics(s: ScalarSolve, eps: float, M_target: float) -> ScalarDiagnostics:
    g = s.U.grid
    dev = s.U.values - M_target
    gx, gy = nodal_gradient(s.U.values, g.h)
    return ScalarDiagnostics(
        sup_error=float(np.max(np.abs(dev))),
        grad_bound_ratio=float(eps * np.max(np.hypot(gx, gy))),
        l2_error=math.sqrt(integrate(dev * dev, g)),
    )


REPORT_COLUMNS = (
    "eps", "delta", "chi", "kind", "seed", "sup_error", "l2_error",
    "grad_ratio", "energy", "el_residual", "iters",
)


def report_row(
    s: ScalarSolve, delta: float, kind: str, seed: int | None, M_target: float
) -> dict:
    d = scalar_diagnostics(s, s.eps, M_target)
    return {
        "eps": s.eps,
        "delta": delta,
        "chi": delta / s.eps,
        "kind": kind,
        "seed": "" if seed is None else seed,
        "sup_error": d.sup_error,
        "l2_error": d.l2_error,
        "grad_ratio": d.grad_bound_ratio,
        "energy": s.energy,
        "el_residual": s.el_residual,
        "iters": s.iterations,
    }
