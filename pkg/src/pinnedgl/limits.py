"""Limit objects of the vortex regime: the London potential ``h0``, the
mean-field energy over vorticity densities, the Green regular part, the
renormalized point energy ``w_n``, the Coulomb-type functional ``I`` and the
critical-field bookkeeping.

All PDEs here are Dirichlet problems for ``-Δ + 1`` on interior grid nodes.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy import integrate as qd
from scipy.interpolate import RectBivariateSpline
from scipy.special import k0

from .mesh import (
    Grid,
    ScalarField,
    dirichlet_helmholtz_matrix,
    gradient_energy,
    integrate,
    trapezoid_weights,
)

__all__ = [
    "LimitFields",
    "MeasureDensity",
    "PointConfig",
    "CriticalFieldRow",
    "NonUniqueMinimizer",
    "solve_limit_fields",
    "green_regular_part",
    "e_lambda",
    "minimize_e_lambda",
    "lambda_threshold_scan",
    "w_n_energy",
    "w_n_gradient",
    "minimize_w_n",
    "i_mu_energy",
    "equilibrium_measure",
    "i0_value",
    "g_eps",
    "f_eps",
    "critical_fields",
    "CRITICAL_FIELD_COLUMNS",
    "SQUARE_LOG_CONSTANT",
    "CELL_LOG_AVERAGE",
]

EULER_GAMMA = 0.57721566490153286061

# ∫∫ log|x - y| over [0,1]² x [0,1]²
SQUARE_LOG_CONSTANT = math.pi / 3 + math.log(2) / 3 - 25.0 / 12.0
# ∫ log|y| over the centred unit square
CELL_LOG_AVERAGE = math.pi / 4 - 1.5 - 0.5 * math.log(2)


class NonUniqueMinimizer(ValueError):
    pass


@functools.lru_cache(maxsize=8)
def _helmholtz_lu(grid: Grid):
    return spla.splu(dirichlet_helmholtz_matrix(grid))


def _interior(grid: Grid) -> tuple[slice, slice]:
    return (slice(1, grid.nx - 1), slice(1, grid.ny - 1))


def _solve_dirichlet(grid: Grid, rhs_interior: np.ndarray, boundary: np.ndarray | None = None):
    """Solve ``(-Δ + 1) f = rhs`` inside with ``f = boundary`` on the rim.

    ``boundary`` is a full-grid array whose rim values are used.
    """
    h2 = grid.h**2
    rhs = rhs_interior.astype(float).copy()
    out = np.zeros(grid.shape)
    if boundary is not None:
        b = np.zeros(grid.shape)
        b[0, :], b[-1, :], b[:, 0], b[:, -1] = boundary[0, :], boundary[-1, :], boundary[:, 0], boundary[:, -1]
        rhs[0, :] += b[0, 1:-1] / h2
        rhs[-1, :] += b[-1, 1:-1] / h2
        rhs[:, 0] += b[1:-1, 0] / h2
        rhs[:, -1] += b[1:-1, -1] / h2
        out = b
    sol = _helmholtz_lu(grid).solve(rhs.ravel())
    out[_interior(grid)] = sol.reshape(rhs.shape)
    return out


def _dirichlet_residual(grid: Grid, f: np.ndarray, rhs_interior: np.ndarray) -> float:
    h2 = grid.h**2
    lap = (f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2] - 4 * f[1:-1, 1:-1]) / h2
    return float(np.max(np.abs(-lap + f[1:-1, 1:-1] - rhs_interior)))


def _h1_half(grid: Grid, xi: np.ndarray) -> float:
    return gradient_energy(xi, grid) + 0.5 * integrate(xi * xi, grid)


@dataclass(frozen=True, eq=False)
class LimitFields:
    grid: Grid
    h0: ScalarField
    xi0: ScalarField
    xi0_min: float
    xi0_min_node: float
    p: tuple[float, float]
    p_node: tuple[int, int]
    Qform: np.ndarray
    J0: float
    SG_pp: float
    residual: float

    @property
    def H0c1_per_logeps(self) -> float:
        return 1.0 / (2.0 * abs(self.xi0_min))

    @property
    def lambda_star(self) -> float:
        """Threshold of the discrete mean-field problem, ``1/(2|min ξ0|)`` over nodes."""
        return 1.0 / (2.0 * abs(self.xi0_min_node))


def _parabolic_offset(fm: float, f0: float, fp: float) -> tuple[float, float]:
    """Vertex offset (in units of h) and value of the parabola through 3 points."""
    den = fm - 2 * f0 + fp
    if den <= 0:
        return 0.0, f0
    t = 0.5 * (fm - fp) / den
    return t, f0 - 0.25 * (fm - fp) * t


def _locate_min(grid: Grid, f: np.ndarray):
    inner = f[1:-1, 1:-1]
    fmin = inner.min()
    tie_tol = 1e-13 * max(abs(fmin), 1e-300)
    cands = np.argwhere(inner <= fmin + tie_tol) + 1
    points = []
    for i, j in cands:
        tx, _ = _parabolic_offset(f[i - 1, j], f[i, j], f[i + 1, j])
        ty, _ = _parabolic_offset(f[i, j - 1], f[i, j], f[i, j + 1])
        points.append(((i + tx) * grid.h, (j + ty) * grid.h))
    pts = np.array(points)
    if np.max(np.ptp(pts, axis=0)) > 1e-6 * grid.h:
        raise NonUniqueMinimizer(
            f"non-unique minimizer: {len(cands)} tied nodes interpolate to distinct points"
        )
    i, j = (int(c) for c in cands[0])
    tx, vx = _parabolic_offset(f[i - 1, j], f[i, j], f[i + 1, j])
    ty, vy = _parabolic_offset(f[i, j - 1], f[i, j], f[i, j + 1])
    # separable quadratic model: the two one-dimensional drops add up
    vmin = f[i, j] - (f[i, j] - vx) - (f[i, j] - vy)
    return (float(pts[:, 0].mean()), float(pts[:, 1].mean())), (i, j), float(vmin), float(fmin)


def _hessian(grid: Grid, f: np.ndarray, i: int, j: int) -> np.ndarray:
    h2 = grid.h**2
    fxx = (f[i + 1, j] - 2 * f[i, j] + f[i - 1, j]) / h2
    fyy = (f[i, j + 1] - 2 * f[i, j] + f[i, j - 1]) / h2
    fxy = (f[i + 1, j + 1] - f[i + 1, j - 1] - f[i - 1, j + 1] + f[i - 1, j - 1]) / (4 * h2)
    return np.array([[fxx, fxy], [fxy, fyy]])


def green_regular_part(grid: Grid, p: tuple[float, float], method: str = "bessel") -> float:
    """``S_G(p, p) = lim_{x→p} 2π 𝒢(x, p) + log|x - p|``.

    ``bessel``: subtract the free-space kernel ``K0(r)/2π``; the remainder
    solves the homogeneous equation with smooth boundary data, and
    ``K0(r) + log r → log 2 - γ_E``. ``log``: subtract ``-log(r)/2π``; the
    remainder solves ``(-Δ + 1) R = log(r)/2π`` and ``S = 2π R(p)``. The log
    route carries a mild singularity in the source and converges more slowly.
    """
    x, y = grid.coordinates()
    r = np.hypot(x - p[0], y - p[1])
    inner = _interior(grid)
    if method == "bessel":
        with np.errstate(divide="ignore"):
            bc = k0(np.where(r > 0, r, 1.0)) / (2 * math.pi)
        R = _solve_dirichlet(grid, np.zeros((grid.nx - 2, grid.ny - 2)), bc)
        base, sign = math.log(2) - EULER_GAMMA, -1.0
    elif method == "log":
        with np.errstate(divide="ignore"):
            lr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), math.log(grid.h) + CELL_LOG_AVERAGE)
        src = lr / (2 * math.pi)
        R = _solve_dirichlet(grid, src[inner], src)
        base, sign = 0.0, 1.0
    else:
        raise ValueError(f"unknown method {method!r}")
    spline = RectBivariateSpline(grid.x, grid.y, R, kx=3, ky=3)
    return base + sign * 2 * math.pi * float(spline(p[0], p[1])[0, 0])


def solve_limit_fields(grid: Grid, sg_method: str = "bessel") -> LimitFields:
    mi, mj = grid.nx - 2, grid.ny - 2
    ones = np.ones(grid.shape)
    h0 = _solve_dirichlet(grid, np.zeros((mi, mj)), ones)
    res = _dirichlet_residual(grid, h0, np.zeros((mi, mj)))
    xi0 = h0 - 1.0
    xi0[0, :] = xi0[-1, :] = xi0[:, 0] = xi0[:, -1] = 0.0
    p, (i, j), vmin, vnode = _locate_min(grid, xi0)
    Qf = _hessian(grid, xi0, i, j)
    return LimitFields(
        grid=grid,
        h0=ScalarField(grid, h0),
        xi0=ScalarField(grid, xi0),
        xi0_min=vmin,
        xi0_min_node=vnode,
        p=p,
        p_node=(i, j),
        Qform=Qf,
        J0=_h1_half(grid, xi0),
        SG_pp=green_regular_part(grid, p, sg_method),
        residual=res,
    )


# --------------------------------------------------------------------------
# mean-field energy over nonnegative densities


@dataclass(frozen=True, eq=False)
class MeasureDensity:
    rho: ScalarField
    energy: float = math.nan
    kkt_defect: float = math.nan
    iterations: int = 0

    def __post_init__(self):
        if np.min(self.rho.values) < 0:
            raise ValueError("densities must be nonnegative")

    @property
    def total(self) -> float:
        return integrate(self.rho)


def _xi_mu(grid: Grid, rho: np.ndarray) -> np.ndarray:
    """``h_μ - 1``: Dirichlet zero, ``(-Δ + 1) ξ = ρ - 1`` inside."""
    inner = _interior(grid)
    return _solve_dirichlet(grid, rho[inner] - 1.0)


def e_lambda(mu: MeasureDensity | np.ndarray, lam: float, lf: LimitFields, grid: Grid | None = None) -> float:
    """``‖μ‖/(2λ) + ½∫|∇h_μ|² + |h_μ - 1|²``; rim values of ρ are ignored by the solve."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    grid = grid or lf.grid
    rho = mu.rho.values if isinstance(mu, MeasureDensity) else np.asarray(mu, float)
    if not np.any(rho):
        xi = lf.xi0.values
    else:
        xi = _xi_mu(grid, rho)
    return integrate(rho, grid) / (2 * lam) + _h1_half(grid, xi)


def minimize_e_lambda(
    lam: float, lf: LimitFields, grid: Grid | None = None, tol: float = 1e-8, max_iter: int = 20000
) -> MeasureDensity:
    """Projected Barzilai-Borwein descent over nonnegative interior densities.

    With the trapezoid inner product the gradient of the smooth part is
    ``ξ_μ = h_μ - 1``, so the full gradient is ``g = ξ_μ + 1/(2λ)`` and the KKT
    defect is ``max |min(ρ, g)|``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    grid = grid or lf.grid
    inner = _interior(grid)
    c = 1.0 / (2 * lam)
    W = trapezoid_weights(grid)[inner]

    def state(r):
        full = np.zeros(grid.shape)
        full[inner] = r
        xi = _xi_mu(grid, full)
        g = xi[inner] + c
        e = c * float(np.sum(W * r)) + _h1_half(grid, xi)
        return e, g

    rho = np.zeros((grid.nx - 2, grid.ny - 2))
    energy, g = state(rho)
    defect = float(np.max(np.abs(np.minimum(rho, g))))
    alpha = 1.0
    it = 0
    while defect > tol and it < max_iter:
        it += 1
        while True:
            trial = np.maximum(rho - alpha * g, 0.0)
            d = trial - rho
            e_t, g_t = state(trial)
            if e_t <= energy + 1e-4 * float(np.sum(W * g * d)) + 1e-15 * max(abs(energy), 1.0):
                break
            alpha *= 0.5
            if alpha < 1e-12:
                break
        s = d
        yv = g_t - g
        sy = float(np.sum(W * s * yv))
        rho, energy, g = trial, e_t, g_t
        alpha = float(np.sum(W * s * s)) / sy if sy > 0 else 1.0
        defect = float(np.max(np.abs(np.minimum(rho, g))))
    if defect > tol:
        raise RuntimeError(f"mean-field descent stalled: KKT defect {defect:.3e} after {it} steps")
    full = np.zeros(grid.shape)
    full[inner] = rho
    return MeasureDensity(ScalarField(grid, full), energy=energy, kkt_defect=defect, iterations=it)


def lambda_threshold_scan(lf: LimitFields, lams, tol: float = 1e-8, mass_floor: float = 1e-10) -> float:
    """Smallest λ in ``lams`` (sorted) whose minimizer carries mass above ``mass_floor``."""
    for lam in sorted(lams):
        if minimize_e_lambda(lam, lf, tol=tol).total > mass_floor:
            return float(lam)
    return math.inf


# --------------------------------------------------------------------------
# renormalized point energy


@dataclass(frozen=True, eq=False)
class PointConfig:
    points: np.ndarray
    value: float = math.nan
    grad_norm: float = math.nan

    def __post_init__(self):
        pts = np.asarray(self.points, float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if len(pts) > 1:
            d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
            d[np.diag_indices(len(pts))] = np.inf
            if d.min() <= 0:
                raise ValueError("points must be pairwise distinct")

    @property
    def n(self) -> int:
        return len(self.points)


def _qvals(pts: np.ndarray, Q: np.ndarray, center) -> np.ndarray:
    y = pts - np.asarray(center, float)
    return np.einsum("ni,ij,nj->n", y, Q, y)


def w_n_energy(cfg: PointConfig | np.ndarray, Qform, center=(0.0, 0.0)) -> float:
    """``-π Σ_{i≠j} log|x_i - x_j| + π n Σ Q(x_i - c)``."""
    pts = cfg.points if isinstance(cfg, PointConfig) else PointConfig(cfg).points
    Q = np.asarray(Qform, float)
    n = len(pts)
    if n == 0:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(n, 1)
    return float(-2 * math.pi * np.sum(np.log(d[iu])) + math.pi * n * np.sum(_qvals(pts, Q, center)))


def w_n_gradient(pts: np.ndarray, Qform, center=(0.0, 0.0)) -> np.ndarray:
    Q = np.asarray(Qform, float)
    n = len(pts)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    np.fill_diagonal(d2, np.inf)
    rep = -2 * math.pi * np.sum(diff / d2[..., None], axis=1)
    conf = math.pi * n * 2 * (pts - np.asarray(center, float)) @ Q.T
    return rep + conf


def _descend(pts: np.ndarray, Q, center, gtol: float, max_iter: int):
    e = w_n_energy(pts, Q, center)
    g = w_n_gradient(pts, Q, center)
    step = 1e-2
    for _ in range(max_iter):
        gmax = float(np.max(np.abs(g)))
        if gmax <= gtol:
            break
        while True:
            trial = pts - step * g
            try:
                e_t = w_n_energy(trial, Q, center)
            except ValueError:
                e_t = math.inf
            if e_t < e or step < 1e-16:
                break
            step *= 0.5
        if not e_t < e:
            break
        pts, e = trial, e_t
        g = w_n_gradient(pts, Q, center)
        step *= 1.5
    return _newton_polish(pts, Q, center, gtol)


def _newton_polish(pts: np.ndarray, Q, center, gtol: float, steps: int = 8):
    # energy differences drown in roundoff near the minimum, so finish with
    # Newton on the analytic gradient and accept steps that shrink it
    g = w_n_gradient(pts, Q, center)
    gmax = float(np.max(np.abs(g)))
    t = 1e-6
    for _ in range(steps):
        if gmax <= gtol * 1e-3:
            break
        flat = pts.ravel()
        H = np.empty((flat.size, flat.size))
        for k in range(flat.size):
            e = np.zeros_like(flat)
            e[k] = t
            gp = w_n_gradient((flat + e).reshape(pts.shape), Q, center).ravel()
            gm = w_n_gradient((flat - e).reshape(pts.shape), Q, center).ravel()
            H[:, k] = (gp - gm) / (2 * t)
        # rotations leave the log part invariant; lstsq handles a flat direction
        dx = np.linalg.lstsq(0.5 * (H + H.T), g.ravel(), rcond=1e-12)[0]
        trial = (flat - dx).reshape(pts.shape)
        try:
            g_t = w_n_gradient(trial, Q, center)
        except ValueError:
            break
        gmax_t = float(np.max(np.abs(g_t)))
        if not gmax_t < gmax:
            break
        pts, g, gmax = trial, g_t, gmax_t
    return pts, w_n_energy(pts, Q, center), gmax


def minimize_w_n(
    n: int,
    Qform,
    restarts: int = 8,
    seed: int = 0,
    center=(0.0, 0.0),
    gtol: float = 1e-8,
    max_iter: int = 200_000,
) -> PointConfig:
    """Best of ``restarts`` step-halving descents from seeded random starts.

    Ties in value (relative 1e-12) go to the lexicographically smaller
    sorted configuration.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return PointConfig(np.zeros((0, 2)), 0.0, 0.0)
    Q = np.asarray(Qform, float)
    if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) <= 0:
        raise ValueError("Q must be positive definite")
    scale = 1.0 / math.sqrt(np.max(np.linalg.eigvalsh(Q)))
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.Generator(np.random.Philox(key=seed * 1000003 + r))
        start = np.asarray(center, float) + scale * rng.normal(size=(n, 2)) * 0.7
        pts, e, gm = _descend(start, Q, center, gtol, max_iter)
        key = tuple(map(tuple, np.round(pts[np.lexsort(pts.T[::-1])], 12)))
        cand = (e, key, pts, gm)
        if best is None:
            best = cand
        elif e < best[0] - 1e-12 * abs(best[0]) or (abs(e - best[0]) <= 1e-12 * abs(best[0]) and key < best[1]):
            best = cand
    return PointConfig(best[2], best[0], best[3])


# --------------------------------------------------------------------------
# Coulomb-type functional on probability densities


def i_mu_energy(
    mu: MeasureDensity | ScalarField,
    Qform,
    center=(0.0, 0.0),
    total_tol: float = 1e-8,
    chunk: int = 2048,
) -> float:
    """``-π∫∫ log|x-y| dμ dμ + π∫Q dμ`` for a nodal density.

    Node masses are ``ρ W``. Distinct nodes interact through ``log`` of their
    distance; each node's self-term uses the exact double integral over a
    uniform square cell of side ``h``: ``m² (log h + C)``.
    """
    rho = mu.rho if isinstance(mu, MeasureDensity) else mu
    g = rho.grid
    mass = (trapezoid_weights(g) * rho.values).ravel()
    if abs(mass.sum() - 1.0) > total_tol:
        raise ValueError(f"density must have unit mass, got {mass.sum():.12g}")
    x, y = g.coordinates()
    keep = mass != 0
    m = mass[keep]
    pts = np.column_stack([x.ravel()[keep], y.ravel()[keep]])
    inter = 0.0
    for s in range(0, len(m), chunk):
        blk = pts[s : s + chunk]
        d = np.hypot(blk[:, None, 0] - pts[None, :, 0], blk[:, None, 1] - pts[None, :, 1])
        idx = np.arange(s, s + len(blk))
        d[np.arange(len(blk)), idx] = 1.0
        inter += float(m[s : s + chunk] @ np.log(d) @ m)
    self_term = float(np.sum(m * m)) * (math.log(g.h) + SQUARE_LOG_CONSTANT)
    conf = float(np.sum(m * _qvals(pts, np.asarray(Qform, float), center)))
    return -math.pi * (inter + self_term) + math.pi * conf


@dataclass(frozen=True)
class EquilibriumEllipse:
    density: float
    semi_axes: tuple[float, float]
    rotation: np.ndarray
    value: float


def equilibrium_measure(Qform) -> EquilibriumEllipse:
    """Minimizer of ``I`` for a positive quadratic ``Q``.

    In the eigenbasis ``Q = diag(a, b)`` the minimizer is uniform with density
    ``(a + b)/2π`` on the ellipse with semi-axes ``√(2b/(a(a+b)))`` and
    ``√(2a/(b(a+b)))``. Its value is ``C/2 + (π/2)∫Q dμ`` where ``C`` is the
    constant of the Euler-Lagrange relation, evaluated at the centre through
    a one-dimensional polar integral.
    """
    Q = 0.5 * (np.asarray(Qform, float) + np.asarray(Qform, float).T)
    evals, evecs = np.linalg.eigh(Q)
    a, b = float(evals[0]), float(evals[1])
    if a <= 0:
        raise ValueError("Q must be positive definite")
    sigma = (a + b) / (2 * math.pi)
    al = math.sqrt(2 * b / (a * (a + b)))
    be = math.sqrt(2 * a / (b * (a + b)))

    def inner(theta):
        rho = al * be / math.hypot(be * math.cos(theta), al * math.sin(theta))
        return 0.5 * rho * rho * (math.log(rho) - 0.5)

    log_int, _ = qd.quad(inner, 0.0, 2 * math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)
    u0 = -sigma * log_int
    q_mean = a * al * al / 4 + b * be * be / 4
    value = math.pi * u0 + 0.5 * math.pi * q_mean
    return EquilibriumEllipse(sigma, (al, be), evecs, value)


def i0_value(Qform) -> float:
    return equilibrium_measure(Qform).value


# --------------------------------------------------------------------------
# critical fields


def _log_inv_ell(n: int, hex: float) -> float:
    return 0.5 * math.log(hex / n)


def g_eps(n: int, hex: float, eps: float, lf: LimitFields, I0: float | None = None) -> float:
    """``hex² J0 + πn|log ε| - 2πn hex|ξ̲0| + π(n² - n) log(1/ℓ) + πn² S + n² I0``."""
    if I0 is None:
        I0 = i0_value(lf.Qform)
    val = hex * hex * lf.J0
    if n == 0:
        return val
    xi = abs(lf.xi0_min)
    return (
        val
        + math.pi * n * abs(math.log(eps))
        - 2 * math.pi * n * hex * xi
        + math.pi * (n * n - n) * _log_inv_ell(n, hex)
        + math.pi * n * n * lf.SG_pp
        + n * n * I0
    )


def f_eps(n: int, hex: float, eps: float, lf: LimitFields) -> float:
    """``hex² J0 + πn log(ℓ/ε) - 2πn hex|ξ̲0| + πn² S + πn² log(1/ℓ)``."""
    val = hex * hex * lf.J0
    if n == 0:
        return val
    li = _log_inv_ell(n, hex)
    xi = abs(lf.xi0_min)
    return (
        val
        + math.pi * n * (-li - math.log(eps))
        - 2 * math.pi * n * hex * xi
        + math.pi * n * n * lf.SG_pp
        + math.pi * n * n * li
    )


def _h_root(n: int, eps: float, lf: LimitFields, I0: float, rtol: float = 1e-8) -> float:
    """Largest ``hex`` where ``g(n) = g(n-1)``, by bisection."""
    xi = abs(lf.xi0_min)

    def diff(h):
        return g_eps(n, h, eps, lf, I0) - g_eps(n - 1, h, eps, lf, I0)

    # the log terms make diff concave in hex with its peak at (n-1)/(4|ξ̲0|)
    lo = max((n - 1) / (4 * xi), 1e-12)
    if n == 1:
        lo = 1e-12
    if diff(lo) <= 0:
        raise ValueError(f"no crossing for n={n}: g(n) - g(n-1) <= 0 already at hex={lo:g}")
    hi = max(2 * lo, 1.0)
    while diff(hi) > 0:
        hi *= 2
        if hi > 1e300:
            raise ValueError(f"no crossing for n={n} in [{lo:g}, {hi:g}]")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if diff(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CriticalFieldRow:
    n: int
    f_eps: float
    g_eps: float
    H_n_root: float
    H_n_asymptotic: float
    K_n: float
    min_w_n: float


CRITICAL_FIELD_COLUMNS = ("n", "f_eps", "g_eps", "H_n_root", "H_n_asymptotic", "K_n", "min_w_n")


def k_n(n: int, wn: float, wn1: float, S: float, gamma: float = 0.0) -> float:
    """Closed formula for the constant in the asymptotic ``H_n``."""
    val = (n - 1) * math.log(1.0 / n)
    if n >= 3:
        val += 0.5 * (n * n - 3 * n + 2) * math.log((n - 1) / n)
    return val + (wn - wn1 + gamma + (2 * n - 1) * math.pi * S) / math.pi


def critical_fields(
    n_max: int,
    eps: float,
    lf: LimitFields,
    gamma: float = 0.0,
    hex: float | None = None,
    restarts: int = 6,
) -> list[CriticalFieldRow]:
    """One row per ``n = 1..n_max``; ``f`` and ``g`` are evaluated at ``hex``
    (default ``H⁰_c1``). ``gamma`` stands for the unspecified universal constant."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    logeps = abs(math.log(eps))
    xi = abs(lf.xi0_min)
    hex = logeps / (2 * xi) if hex is None else hex
    I0 = i0_value(lf.Qform)
    rows = []
    w_prev = 0.0
    for n in range(1, n_max + 1):
        wn = minimize_w_n(n, lf.Qform, restarts=restarts).value
        K = k_n(n, wn, w_prev, lf.SG_pp, gamma)
        H_asym = (logeps + (n - 1) * math.log(logeps / (2 * xi)) + K) / (2 * xi)
        rows.append(
            CriticalFieldRow(
                n,
                f_eps(n, hex, eps, lf),
                g_eps(n, hex, eps, lf, I0),
                _h_root(n, eps, lf, I0),
                H_asym,
                K,
                wn,
            )
        )
        w_prev = wn
    return rows
