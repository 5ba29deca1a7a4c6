"""Magnetic Ginzburg-Landau energy with optional pinning, vorticity, and the
comparison between the denoised pinned energy and the unpinned energy of
``v = u / U``.

The discrete functional is the continuum one evaluated with edge differences:
``D u = (u_q - u_p)/h - i A_mid u_mid`` on every grid edge, a nodal potential
and a cell-centred induced field. Gauge invariance is therefore approximate
(second order), which the tests measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .mesh import (
    ComplexField,
    Grid,
    ScalarField,
    _parse_blocks,
    covariant_kinetic,
    dump_field,
    field_energy,
    integrate,
    nodal_curl,
    nodal_gradient,
    trapezoid_weights,
)
from .pinning import PinningField
from .scalar import ScalarSolve, minimize_scalar, pinned_energy

__all__ = [
    "GLState",
    "EnergyParts",
    "GLEnergy",
    "VorticityReport",
    "BallSum",
    "QuasiMinReport",
    "DivergenceError",
    "gl_energy",
    "minimize_gl",
    "vortex_imprint",
    "normal_state",
    "random_smooth_state",
    "vorticity",
    "supercurrent",
    "weighted_energy",
    "scaled_energy",
    "quasiminimizer_report",
    "save_state",
    "load_state",
]


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergyParts:
    kinetic: float
    potential: float
    field: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.field


@dataclass(eq=False)
class GLState:
    u: ComplexField
    A: tuple[ScalarField, ScalarField]
    hex: float
    energy_parts: EnergyParts | None = None
    grad_norm: float = math.nan
    sweeps: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def a1(self) -> np.ndarray:
        return self.A[0].values

    @property
    def a2(self) -> np.ndarray:
        return self.A[1].values

    def gauge(self, phi: np.ndarray) -> "GLState":
        """``u e^{iφ}``, ``A + ∇φ`` with the nodal gradient of ``φ``."""
        g = self.grid
        gx, gy = nodal_gradient(phi, g.h)
        return GLState(
            ComplexField(g, self.u.values * np.exp(1j * phi)),
            (ScalarField(g, self.a1 + gx), ScalarField(g, self.a2 + gy)),
            self.hex,
        )


def _a_values(p, grid: Grid) -> np.ndarray:
    if p is None:
        return np.ones(grid.shape)
    if isinstance(p, PinningField):
        return p.values
    if isinstance(p, ScalarField):
        return p.values
    return np.broadcast_to(np.asarray(p, float), grid.shape)


@dataclass(frozen=True, eq=False)
class GLEnergy:
    kinetic: float
    potential: float
    field: float
    total: float
    density: ScalarField


def _parts(u, a1, a2, a, eps, hex, grid) -> EnergyParts:
    W = trapezoid_weights(grid)
    kin = covariant_kinetic(u, a1, a2, grid)
    pot = float(np.sum(W * (a - np.abs(u) ** 2) ** 2)) / (4 * eps * eps)
    fe = field_energy(a1, a2, hex, grid)
    return EnergyParts(kin, pot, fe)


def gl_energy(s: GLState, p=None, eps: float = 1.0) -> GLEnergy:
    """Kinetic, potential and field parts; ``a ≡ 1`` when ``p`` is absent.

    ``density`` is the nodal energy density built from centred differences.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = s.grid
    a = _a_values(p, g)
    parts = _parts(s.u.values, s.a1, s.a2, a, eps, s.hex, g)
    u = s.u.values
    ux, uy = nodal_gradient(u, g.h)
    dens = (
        0.5 * (np.abs(ux - 1j * s.a1 * u) ** 2 + np.abs(uy - 1j * s.a2 * u) ** 2)
        + (a - np.abs(u) ** 2) ** 2 / (4 * eps * eps)
        + 0.5 * (nodal_curl(s.a1, s.a2, g.h) - s.hex) ** 2
    )
    return GLEnergy(parts.kinetic, parts.potential, parts.field, parts.total, ScalarField(g, dens))


# --------------------------------------------------------------------------
# initial states


def normal_state(grid: Grid, hex: float = 0.0, value: complex = 1.0) -> GLState:
    z = np.zeros(grid.shape)
    return GLState(
        ComplexField(grid, np.full(grid.shape, value, dtype=complex)),
        (ScalarField(grid, z), ScalarField(grid, z.copy())),
        hex,
    )


def vortex_imprint(
    grid: Grid,
    centers,
    degrees,
    eps: float,
    hex: float = 0.0,
    modulus=None,
) -> GLState:
    """``Π tanh(r_k/ε) e^{i d_k θ_k}``; ``modulus`` may override the profile."""
    x, y = grid.coordinates()
    u = np.ones(grid.shape, dtype=complex)
    for (cx, cy), d in zip(centers, degrees):
        dx, dy = x - cx, y - cy
        r = np.hypot(dx, dy)
        prof = np.tanh(r / eps) if modulus is None else modulus(r)
        u *= prof ** abs(int(d)) * np.exp(1j * int(d) * np.arctan2(dy, dx))
    z = np.zeros(grid.shape)
    return GLState(ComplexField(grid, u), (ScalarField(grid, z), ScalarField(grid, z.copy())), hex)


def random_smooth_state(
    grid: Grid,
    seed: int,
    hex: float = 0.0,
    modes: int = 3,
    phase_amp: float = 2.0,
    modulus_amp: float = 0.3,
    field_amp: float = 1.0,
) -> GLState:
    """Low-mode random ``u = r e^{iφ}`` and ``A``, scaled to the domain size.

    Wavelengths are fractions of the domain side, so gradients grow like
    ``1/L`` on small domains. ``field_amp`` multiplies ``A`` in units of ``1/L``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    L = max(grid.lx, grid.ly)
    k = np.arange(modes + 1)
    ex = np.exp(2j * np.pi * np.outer(k, np.arange(grid.nx) * grid.h) / L)
    ey = np.exp(2j * np.pi * np.outer(k, np.arange(grid.ny) * grid.h) / L)

    def smooth():
        # Σ c_k cos(2π k·x/L + θ_k) as a separable complex sum
        coef = np.zeros((modes + 1, modes + 1), dtype=complex)
        for kx in range(modes + 1):
            for ky in range(modes + 1):
                if kx == ky == 0:
                    continue
                c, th = rng.normal() / (kx * kx + ky * ky), rng.uniform(0, 2 * np.pi)
                coef[kx, ky] = c * np.exp(1j * th)
        f = (ex.T @ coef @ ey).real
        return f / max(np.max(np.abs(f)), 1e-300)

    phi = phase_amp * np.pi * smooth()
    r = 1.0 + modulus_amp * smooth()
    u = r * np.exp(1j * phi)
    a1 = field_amp * smooth() / L
    a2 = field_amp * smooth() / L
    return GLState(ComplexField(grid, u), (ScalarField(grid, a1), ScalarField(grid, a2)), hex)


# --------------------------------------------------------------------------
# alternating descent


def _u_objective(a1, a2, a, eps, hex, grid):
    W = trapezoid_weights(grid)
    shape = grid.shape
    n = grid.size

    def fun(x):
        u = x[:n].reshape(shape) + 1j * x[n:].reshape(shape)
        kin, gu, _, _ = covariant_kinetic(u, a1, a2, grid, with_gradient=True)
        r = a - np.abs(u) ** 2
        pot = float(np.sum(W * r * r)) / (4 * eps * eps)
        gu = gu - W * r * u / (eps * eps)
        return kin + pot, np.concatenate([gu.real.ravel(), gu.imag.ravel()])

    return fun


def _a_objective(u, a, eps, hex, grid):
    W = trapezoid_weights(grid)
    shape = grid.shape
    n = grid.size
    pot = float(np.sum(W * (a - np.abs(u) ** 2) ** 2)) / (4 * eps * eps)

    def fun(x):
        a1 = x[:n].reshape(shape)
        a2 = x[n:].reshape(shape)
        kin, _, g1, g2 = covariant_kinetic(u, a1, a2, grid, with_gradient=True)
        fe, f1, f2 = field_energy(a1, a2, hex, grid, with_gradient=True)
        return kin + pot + fe, np.concatenate([(g1 + f1).ravel(), (g2 + f2).ravel()])

    return fun


def _resolve_init(init, grid: Grid, hex: float) -> GLState:
    if init is None or init == "normal":
        return normal_state(grid, hex)
    if isinstance(init, GLState):
        if init.grid != grid:
            raise ValueError("initial state lives on a different grid")
        return GLState(init.u, init.A, hex)
    if isinstance(init, ComplexField):
        return GLState(init, normal_state(grid).A, hex)
    raise ValueError(f"unsupported initial state {init!r}")


def minimize_gl(
    p,
    eps: float,
    hex: float,
    grid: Grid,
    init=None,
    tol: float = 1e-9,
    window: int = 50,
    max_sweeps: int = 400,
    inner_iter: int = 50,
    gtol: float = 1e-10,
) -> GLState:
    """Alternate L-BFGS sweeps over ``u`` (A frozen) and ``A`` (u frozen).

    Stops when the relative energy decrease over ``window`` sweeps drops below
    ``tol``, when the gradient falls below ``gtol``, or after ``max_sweeps``.
    Each half sweep is accepted only if it does not raise the energy; if both
    halves of a sweep fail to descend the run aborts with
    :class:`DivergenceError`.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if hex < 0:
        raise ValueError("hex must be nonnegative")
    a = _a_values(p, grid)
    st = _resolve_init(init, grid, hex)
    u = st.u.values.copy()
    a1, a2 = st.a1.copy(), st.a2.copy()
    n = grid.size
    energy = _parts(u, a1, a2, a, eps, hex, grid).total
    history = [energy]
    gnorm = math.inf
    sweeps = 0
    opts = {"maxiter": inner_iter, "gtol": 0.0, "ftol": 1e-15}
    while sweeps < max_sweeps:
        sweeps += 1
        moved = False
        fu = _u_objective(a1, a2, a, eps, hex, grid)
        x0 = np.concatenate([u.real.ravel(), u.imag.ravel()])
        res = minimize(fu, x0, jac=True, method="L-BFGS-B", options=opts)
        if res.fun <= energy:
            moved |= res.fun < energy
            u = res.x[:n].reshape(grid.shape) + 1j * res.x[n:].reshape(grid.shape)
            energy = float(res.fun)
        gu = np.max(np.abs(fu(np.concatenate([u.real.ravel(), u.imag.ravel()]))[1]))
        fa = _a_objective(u, a, eps, hex, grid)
        x0 = np.concatenate([a1.ravel(), a2.ravel()])
        res = minimize(fa, x0, jac=True, method="L-BFGS-B", options=opts)
        if res.fun <= energy:
            moved |= res.fun < energy
            a1 = res.x[:n].reshape(grid.shape)
            a2 = res.x[n:].reshape(grid.shape)
            energy = float(res.fun)
        ga = np.max(np.abs(fa(np.concatenate([a1.ravel(), a2.ravel()]))[1]))
        gnorm = float(max(gu, ga))
        if history and energy > history[-1]:
            raise DivergenceError(f"energy rose from {history[-1]} to {energy} at sweep {sweeps}")
        history.append(energy)
        if gnorm <= gtol:
            break
        if not moved:
            if gnorm > 1e3 * gtol and sweeps == 1:
                raise DivergenceError("no descent from the initial state despite a nonzero gradient")
            break
        if len(history) > window:
            old = history[-1 - window]
            if (old - energy) <= tol * max(abs(energy), 1e-300):
                break
    g = grid
    out = GLState(
        ComplexField(g, u),
        (ScalarField(g, a1), ScalarField(g, a2)),
        hex,
        grad_norm=gnorm,
        sweeps=sweeps,
        history=history,
    )
    out.energy_parts = _parts(u, a1, a2, a, eps, hex, g)
    return out


# --------------------------------------------------------------------------
# vorticity


@dataclass(frozen=True)
class BallSum:
    center: tuple[float, float]
    radius: float
    circulation: float


@dataclass(frozen=True, eq=False)
class VorticityReport:
    mu: ScalarField
    j: tuple[ScalarField, ScalarField]
    total_mu: float
    ball_sums: list


def supercurrent(u: np.ndarray, a1: np.ndarray, a2: np.ndarray, h: float):
    """``(iu, ∇u - iAu) = Im(ū∇u) - |u|² A`` with centred differences."""
    ux, uy = nodal_gradient(u, h)
    rho = np.abs(u) ** 2
    return np.imag(np.conj(u) * ux) - rho * a1, np.imag(np.conj(u) * uy) - rho * a2


def vorticity(s: GLState, balls=()) -> VorticityReport:
    """``μ = curl j + curl A``; ``balls`` is a list of ``((cx, cy), r)``."""
    g = s.grid
    j1, j2 = supercurrent(s.u.values, s.a1, s.a2, g.h)
    mu = nodal_curl(j1, j2, g.h) + nodal_curl(s.a1, s.a2, g.h)
    W = trapezoid_weights(g)
    x, y = g.coordinates()
    sums = []
    for (cx, cy), r in balls:
        mask = (x - cx) ** 2 + (y - cy) ** 2 <= r * r
        sums.append(BallSum((float(cx), float(cy)), float(r), float(np.sum(W * mu * mask))))
    return VorticityReport(
        ScalarField(g, mu),
        (ScalarField(g, j1), ScalarField(g, j2)),
        integrate(mu, g),
        sums,
    )


# --------------------------------------------------------------------------
# pinned versus unpinned


def weighted_energy(v, a1, a2, U: np.ndarray, eps: float, hex: float, grid: Grid) -> float:
    """``½∫U²|∇v - iAv|² + (1/4ε²)∫U⁴(1-|v|²)² + ½∫|curl A - h_ex|²``."""
    W = trapezoid_weights(grid)
    kin = covariant_kinetic(v, a1, a2, grid, node_weight=U * U)
    pot = float(np.sum(W * U**4 * (1 - np.abs(v) ** 2) ** 2)) / (4 * eps * eps)
    fe = field_energy(a1, a2, hex, grid) if a1 is not None else 0.0
    return kin + pot + fe


def scaled_energy(v, a1, a2, M: float, eps: float, hex: float, grid: Grid) -> float:
    """Unpinned energy for a medium of mean ``M²``: kinetic × M², potential × M⁴."""
    W = trapezoid_weights(grid)
    kin = covariant_kinetic(v, a1, a2, grid)
    pot = float(np.sum(W * (1 - np.abs(v) ** 2) ** 2)) / (4 * eps * eps)
    fe = field_energy(a1, a2, hex, grid) if a1 is not None else 0.0
    return M**2 * kin + M**4 * pot + fe


@dataclass(frozen=True)
class QuasiMinReport:
    denoised: float
    unpinned_of_v: float
    ratio: float
    weighted: float
    unpinned_plain: float
    sup_U_error: float
    m: float
    M: float
    sandwich_ok: bool
    sandwich_U_ok: bool


def quasiminimizer_report(
    u: ComplexField,
    A,
    p: PinningField,
    eps: float,
    hex: float,
    U: ScalarSolve | ScalarField | None = None,
) -> QuasiMinReport:
    """Denoised pinned energy against the unpinned energy of ``v = u/U``.

    ``U`` defaults to a fresh :func:`minimize_scalar` run. When the pinning
    mean ``M²`` differs from 1 the comparison uses the rescaled unpinned
    energy. Two sandwich checks are reported: with the pinning bounds
    ``m⁴ GL ≤ GL_weight ≤ M⁴ GL`` (valid for ``m ≤ 1 ≤ M``) and with the
    extremes of ``U`` in the same roles.
    """
    g = u.grid
    if U is None:
        U = minimize_scalar(p, eps)
    Uv = U.U.values if isinstance(U, ScalarSolve) else U.values
    if Uv.min() <= 0:
        raise ValueError("U must be positive")
    a = p.values
    uv = u.values
    a1 = a2 = None
    if A is not None:
        a1, a2 = (x.values if isinstance(x, ScalarField) else np.asarray(x) for x in A)
    pin = (
        covariant_kinetic(uv, a1, a2, g)
        + float(np.sum(trapezoid_weights(g) * (a - np.abs(uv) ** 2) ** 2)) / (4 * eps * eps)
        + (field_energy(a1, a2, hex, g) if a1 is not None else 0.0)
    )
    denoised = pin - pinned_energy(Uv, a, eps, g)
    v = uv / Uv
    Mbar = math.sqrt(p.target_mean)
    unpinned = scaled_energy(v, a1, a2, Mbar, eps, hex, g)
    plain = scaled_energy(v, a1, a2, 1.0, eps, hex, g)
    weighted = weighted_energy(v, a1, a2, Uv, eps, hex, g)
    m, M = p.m, p.M
    ok = (m**4 * plain <= weighted <= M**4 * plain) if m <= 1 <= M else False
    umin, umax = float(Uv.min()), float(Uv.max())
    lo = min(umin**2, umin**4, 1.0)
    hi = max(umax**2, umax**4, 1.0)
    ok_u = lo * plain <= weighted <= hi * plain
    return QuasiMinReport(
        denoised=denoised,
        unpinned_of_v=unpinned,
        ratio=denoised / unpinned,
        weighted=weighted,
        unpinned_plain=plain,
        sup_U_error=float(np.max(np.abs(Uv - Mbar))),
        m=m,
        M=M,
        sandwich_ok=bool(ok),
        sandwich_U_ok=bool(ok_u),
    )


# --------------------------------------------------------------------------
# checkpoints


def save_state(
    s: GLState, path, eps: float, delta: float | None = None, kind: str = "none", seed=None
) -> None:
    """Manifest ``# eps hex delta kind seed`` then re u, im u, A1, A2 dumps."""
    g = s.grid
    path = Path(path)
    d = "nan" if delta is None else f"{delta:.17g}"
    sd = "none" if seed is None else str(seed)
    path.write_text("")
    blocks = (s.u.re, s.u.im, s.a1, s.a2)
    for k, b in enumerate(blocks):
        manifest = f"eps={eps:.17g} hex={s.hex:.17g} delta={d} kind={kind} seed={sd}" if k == 0 else None
        dump_field(ScalarField(g, b), path, manifest=manifest, mode="a")


def load_state(path) -> tuple[GLState, dict]:
    manifests, blocks = _parse_blocks(Path(path).read_text().splitlines())
    if len(blocks) != 4 or not manifests:
        raise ValueError(f"{path} is not a state checkpoint")
    meta = dict(item.split("=", 1) for item in manifests[0].split())
    hex = float(meta["hex"])
    g = blocks[0].grid
    st = GLState(
        ComplexField.from_parts(g, blocks[0].values, blocks[1].values),
        (blocks[2], blocks[3]),
        hex,
    )
    return st, meta
