"""Uniform node-centred grids on rectangles with homogeneous Neumann semantics.

Boundary nodes carry a reflected ghost neighbour, so the 5-point Laplacian at
node ``i = 0`` reads ``2 (u[1] - u[0]) / h**2``.  With trapezoidal weights the
operator is self-adjoint, and every discrete energy in this package is written
as an edge sum whose gradient is exactly ``-W * laplacian``.

Arrays are indexed ``values[i, j]`` with ``i`` along x and ``j`` along y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import fft

__all__ = [
    "Grid",
    "ScalarField",
    "ComplexField",
    "build_grid",
    "grid_from_intervals",
    "trapezoid_weights",
    "integrate",
    "neumann_laplacian",
    "laplacian_matrix",
    "dirichlet_helmholtz_matrix",
    "gradient_energy",
    "nodal_gradient",
    "nodal_curl",
    "covariant_kinetic",
    "plaquette_curl",
    "field_energy",
    "NeumannSpectralSolver",
    "dump_field",
    "load_field",
]

_SPACING_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    lx: float
    ly: float
    nx: int
    ny: int
    h: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per side, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0 and self.h > 0):
            raise ValueError("grid dimensions must be positive")
        hx = self.lx / (self.nx - 1)
        hy = self.ly / (self.ny - 1)
        if abs(hx - hy) > _SPACING_RTOL * max(hx, hy) or abs(hx - self.h) > _SPACING_RTOL * hx:
            raise ValueError(f"spacing mismatch between axes: hx={hx!r}, hy={hy!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.h

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.h

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def full(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(value)))


def build_grid(lx: float, ly: float, n_per_unit: float) -> Grid:
    """Grid on ``[0, lx] x [0, ly]`` with ``n_per_unit`` intervals per unit length.

    >>> g = build_grid(2, 1, 10)
    >>> (g.nx, g.ny, round(g.h, 12))
    (21, 11, 0.1)
    """
    if not (lx > 0 and ly > 0):
        raise ValueError(f"domain sides must be positive, got lx={lx}, ly={ly}")
    if n_per_unit < 2:
        raise ValueError(f"resolution too small: n_per_unit={n_per_unit} < 2")
    mx = int(round(lx * n_per_unit))
    my = int(round(ly * n_per_unit))
    return grid_from_intervals(lx, ly, mx, my)


def grid_from_intervals(lx: float, ly: float, mx: int, my: int) -> Grid:
    """Grid with ``mx`` x ``my`` intervals; raises if the spacings disagree."""
    mx, my = int(mx), int(my)
    if mx < 2 or my < 2:
        raise ValueError(f"resolution too small: {mx}x{my} intervals")
    return Grid(float(lx), float(ly), mx + 1, my + 1, float(lx) / mx)


def _check_values(grid: Grid, values: np.ndarray, name: str) -> None:
    if values.shape != grid.shape:
        raise ValueError(f"{name} has shape {values.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        _check_values(self.grid, v, "ScalarField")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        _check_values(self.grid, v, "ComplexField")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_parts(cls, grid: Grid, re, im) -> "ComplexField":
        return cls(grid, np.asarray(re, float) + 1j * np.asarray(im, float))

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, (ScalarField, ComplexField)) else np.asarray(f)


# --------------------------------------------------------------------------
# quadrature


def _axis_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def trapezoid_weights(grid: Grid) -> np.ndarray:
    return np.outer(_axis_weights(grid.nx, grid.h), _axis_weights(grid.ny, grid.h))


def integrate(f, grid: Grid | None = None) -> float:
    """Trapezoidal rule over the rectangle (exact for bilinear integrands)."""
    if grid is None:
        grid = f.grid
    v = _values(f)
    return float(np.sum(trapezoid_weights(grid) * v))


# --------------------------------------------------------------------------
# Laplacians


def neumann_laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian with ghost nodes reflected across the boundary.

    Sign convention: returns ``Δf``, so a unit spike gives ``-4/h**2`` at the
    spike and ``1/h**2`` at its four neighbours.
    """
    g = f.grid
    return ScalarField(g, _laplacian_array(f.values, g.h))


def _laplacian_array(v: np.ndarray, h: float) -> np.ndarray:
    p = np.pad(v, 1, mode="reflect")
    return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * v) / (h * h)


def _neumann_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / (h * h)


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse form of :func:`neumann_laplacian` acting on ``values.ravel()``."""
    dx = _neumann_1d(grid.nx, grid.h)
    dy = _neumann_1d(grid.ny, grid.h)
    return (sp.kron(dx, sp.identity(grid.ny)) + sp.kron(sp.identity(grid.nx), dy)).tocsr()


def dirichlet_helmholtz_matrix(grid: Grid) -> sp.csc_matrix:
    """``-Δ + 1`` on interior nodes, homogeneous Dirichlet data eliminated."""
    mx, my = grid.nx - 2, grid.ny - 2

    def d1(n):
        e = np.ones(n)
        return sp.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1]) / grid.h**2

    k = sp.kron(d1(mx), sp.identity(my)) + sp.kron(sp.identity(mx), d1(my))
    return (k + sp.identity(mx * my)).tocsc()


def gradient_energy(f, grid: Grid | None = None) -> float:
    """``½∫|∇f|²`` as an edge sum; its gradient is ``-W Δf`` exactly."""
    if grid is None:
        grid = f.grid
    v = _values(f)
    h = grid.h
    wx = _axis_weights(grid.nx, h)
    wy = _axis_weights(grid.ny, h)
    ex = np.abs(np.diff(v, axis=0)) ** 2
    ey = np.abs(np.diff(v, axis=1)) ** 2
    return 0.5 * float(np.sum(ex * wy[None, :]) + np.sum(ey * wx[:, None])) / h


def nodal_gradient(v: np.ndarray, h: float, edge_order: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Central differences inside, one-sided at the boundary."""
    gx, gy = np.gradient(v, h, edge_order=edge_order)
    return gx, gy


def nodal_curl(a1: np.ndarray, a2: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(a2, h, axis=0, edge_order=2) - np.gradient(a1, h, axis=1, edge_order=2)


# --------------------------------------------------------------------------
# gauge-covariant kinetic term and the induced-field term


def covariant_kinetic(
    u: np.ndarray,
    a1: np.ndarray | None,
    a2: np.ndarray | None,
    grid: Grid,
    node_weight: np.ndarray | None = None,
    with_gradient: bool = False,
):
    """``½∫ c |∇u - iAu|²`` on edges.

    Each edge carries the difference quotient minus ``i A_mid u_mid`` where both
    midpoint values are edge averages. ``node_weight`` (``c``) enters through
    its edge average. Returns the energy, and when ``with_gradient`` also the
    gradients with respect to ``u`` (as ``∂/∂Re + i ∂/∂Im``), ``A1`` and ``A2``.
    """
    h = grid.h
    wx = _axis_weights(grid.nx, h)
    wy = _axis_weights(grid.ny, h)
    total = 0.0
    gu = np.zeros_like(u, dtype=complex) if with_gradient else None
    ga = [np.zeros(grid.shape), np.zeros(grid.shape)] if with_gradient else None
    for axis, a, wt in ((0, a1, wy[None, :] * h), (1, a2, wx[:, None] * h)):
        sl_p = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
        sl_q = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
        up, uq = u[sl_p], u[sl_q]
        w = wt
        if node_weight is not None:
            w = wt * 0.5 * (node_weight[sl_p] + node_weight[sl_q])
        if a is None:
            d = (uq - up) / h
            am = None
        else:
            am = 0.5 * (a[sl_p] + a[sl_q])
            d = (uq - up) / h - 1j * am * 0.5 * (up + uq)
        total += 0.5 * float(np.sum(w * np.abs(d) ** 2))
        if with_gradient:
            half_a = 0.0 if am is None else 0.5 * am
            gu[sl_q] += w * d * (1.0 / h + 1j * half_a)
            gu[sl_p] += w * d * (-1.0 / h + 1j * half_a)
            if am is not None:
                gam = w * np.imag(0.5 * (up + uq) * np.conj(d))
                ga[axis][sl_p] += 0.5 * gam
                ga[axis][sl_q] += 0.5 * gam
    if with_gradient:
        return total, gu, ga[0], ga[1]
    return total


def plaquette_curl(a1: np.ndarray, a2: np.ndarray, h: float) -> np.ndarray:
    """``∂₁A₂ - ∂₂A₁`` at cell centres from edge-averaged nodal values."""
    d1a2 = (a2[1:, :-1] + a2[1:, 1:] - a2[:-1, :-1] - a2[:-1, 1:]) / (2 * h)
    d2a1 = (a1[:-1, 1:] + a1[1:, 1:] - a1[:-1, :-1] - a1[1:, :-1]) / (2 * h)
    return d1a2 - d2a1


def field_energy(a1, a2, hex: float, grid: Grid, with_gradient: bool = False):
    """``½∫|curl A - h_ex|²`` by the cell-centre rule."""
    h = grid.h
    r = plaquette_curl(a1, a2, h) - hex
    energy = 0.5 * h * h * float(np.sum(r * r))
    if not with_gradient:
        return energy
    s = h * h * r / (2 * h)
    g1 = np.zeros(grid.shape)
    g2 = np.zeros(grid.shape)
    g2[1:, :-1] += s
    g2[1:, 1:] += s
    g2[:-1, :-1] -= s
    g2[:-1, 1:] -= s
    g1[:-1, 1:] -= s
    g1[1:, 1:] -= s
    g1[:-1, :-1] += s
    g1[1:, :-1] += s
    return energy, g1, g2


# --------------------------------------------------------------------------
# fast solves for (alpha - beta Δ) u = f with reflected ghosts


class NeumannSpectralSolver:
    """Diagonalises the reflected-ghost Laplacian with the type-I DCT.

    Works for any number of axes; ``shape`` and ``h`` describe the node array.
    """

    def __init__(self, shape: tuple[int, ...], h: float):
        self.shape = tuple(shape)
        lam = np.zeros(self.shape)
        for ax, n in enumerate(self.shape):
            k = np.arange(n)
            lk = -4.0 / h**2 * np.sin(np.pi * k / (2 * (n - 1))) ** 2
            idx = [None] * len(self.shape)
            idx[ax] = slice(None)
            lam = lam + lk[tuple(idx)]
        self.eigenvalues = lam

    def solve(self, rhs: np.ndarray, alpha: float, beta: float) -> np.ndarray:
        c = fft.dctn(rhs, type=1)
        c /= alpha - beta * self.eigenvalues
        return fft.idctn(c, type=1)


# --------------------------------------------------------------------------
# text dumps


def dump_field(f: ScalarField, path, manifest: str | None = None, mode: str = "w") -> None:
    """Header ``# nx ny h lx ly`` then one row per ``j`` with 17 significant digits."""
    g = f.grid
    with open(path, mode) as fh:
        if manifest is not None:
            fh.write(f"# {manifest}\n")
        fh.write(f"# {g.nx} {g.ny} {g.h:.17g} {g.lx:.17g} {g.ly:.17g}\n")
        for j in range(g.ny):
            fh.write(" ".join(f"{x:.17g}" for x in f.values[:, j]) + "\n")


def _parse_blocks(lines: list[str]) -> tuple[list[str], list[ScalarField]]:
    manifests: list[str] = []
    blocks: list[ScalarField] = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("#"):
            raise ValueError(f"expected header line, got {line[:40]!r}")
        parts = line[1:].split()
        if len(parts) == 5 and parts[0].isdigit() and parts[1].isdigit():
            nx, ny = int(parts[0]), int(parts[1])
            h, lx, ly = (float(p) for p in parts[2:])
            g = Grid(lx, ly, nx, ny, h)
            rows = [np.array(lines[i + 1 + j].split(), dtype=float) for j in range(ny)]
            blocks.append(ScalarField(g, np.array(rows).T))
            i += 1 + ny
        else:
            manifests.append(line[1:].strip())
            i += 1
    return manifests, blocks


def load_field(path) -> ScalarField:
    _, blocks = _parse_blocks(Path(path).read_text().splitlines())
    if len(blocks) != 1:
        raise ValueError(f"{path} holds {len(blocks)} field blocks, expected 1")
    return blocks[0]
