"""Oscillating pinning terms: periodic cells and random checkerboards.

A periodic field is ``a(x) = a0({x / delta})`` sampled at grid nodes. A random
field assigns an independent draw to every cell of the shifted lattice
``s + delta Z^2``; the shift ``s`` is uniform in ``[0, delta)^2``. Cell values
come from a hash of ``(seed, k, l)``, so the result does not depend on the
order in which cells are visited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mesh import Grid, ScalarField, integrate

__all__ = [
    "CellFunction",
    "RandomCellLaw",
    "PinningField",
    "sample_periodic",
    "exact_mean_intervals",
    "sample_random",
    "empirical_mean_drift",
    "cell_value_hash",
]

KINDS = ("constant", "checkerboard2x2", "piecewise_k", "trig")

# nodes closer than this (in cell units) to an integer are snapped onto it
_FRAC_SNAP = 1e-9


def _frac(t: np.ndarray) -> np.ndarray:
    r = np.round(t)
    t = np.where(np.abs(t - r) < _FRAC_SNAP, r, t)
    return t - np.floor(t)


@dataclass(frozen=True)
class CellFunction:
    """A bounded function on the unit cell, extended periodically.

    ``values`` depends on ``kind``: one number for ``constant``; the pair
    ``(a, b)`` for ``checkerboard2x2``; a ``k x k`` nested list for
    ``piecewise_k`` (row index along x); ``alpha`` is used by ``trig``.
    With ``symmetric=True`` the 2x2 checkerboard is laid out so that it is
    mirror-symmetric about ``x_i = 1/2``.
    """

    kind: str
    values: tuple = ()
    alpha: float = 0.0
    symmetric: bool = False
    _blocks: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}; expected one of {KINDS}")
        vals = self.values
        if self.kind == "constant":
            vals = np.atleast_1d(np.asarray(vals, float))
            if vals.size != 1:
                raise ValueError("constant cell takes exactly one value")
            blocks = vals.reshape(1, 1)
        elif self.kind == "checkerboard2x2":
            vals = np.asarray(vals, float).ravel()
            if vals.size != 2:
                raise ValueError("checkerboard2x2 takes two values")
            a, b = vals
            if self.symmetric:
                blocks = np.array([[a, b, b, a], [b, a, a, b], [b, a, a, b], [a, b, b, a]])
            else:
                blocks = np.array([[a, b], [b, a]])
        elif self.kind == "piecewise_k":
            blocks = np.asarray(vals, float)
            if blocks.ndim != 2 or blocks.shape[0] != blocks.shape[1] or blocks.size == 0:
                raise ValueError("piecewise_k takes a non-empty k x k array of values")
            if self.symmetric and not (
                np.array_equal(blocks, blocks[::-1, :]) and np.array_equal(blocks, blocks[:, ::-1])
            ):
                raise ValueError("piecewise_k values flagged symmetric are not mirror-symmetric")
        else:
            if not 0 <= abs(self.alpha) < 1:
                raise ValueError("trig cell needs |alpha| < 1 to stay positive")
            blocks = None
        if blocks is not None:
            if not np.all(np.isfinite(blocks)) or np.min(blocks) <= 0:
                raise ValueError("cell values must be positive and finite")
            object.__setattr__(self, "_blocks", blocks)
        if self.kind == "trig":
            # cos(2 pi x) cos(2 pi y) is already mirror-symmetric about 1/2
            object.__setattr__(self, "symmetric", True)
        elif self.kind == "constant":
            object.__setattr__(self, "symmetric", True)

    @classmethod
    def constant(cls, c: float) -> "CellFunction":
        return cls("constant", (float(c),))

    @classmethod
    def checkerboard(cls, a: float, b: float, symmetric: bool = False) -> "CellFunction":
        return cls("checkerboard2x2", (float(a), float(b)), symmetric=symmetric)

    @classmethod
    def piecewise(cls, blocks, symmetric: bool = False) -> "CellFunction":
        blocks = tuple(tuple(float(x) for x in row) for row in blocks)
        return cls("piecewise_k", blocks, symmetric=symmetric)

    @classmethod
    def trig(cls, alpha: float) -> "CellFunction":
        return cls("trig", (), alpha=float(alpha))

    @property
    def m(self) -> float:
        if self.kind == "trig":
            return 1.0 - abs(self.alpha)
        return float(np.min(self._blocks))

    @property
    def M(self) -> float:
        if self.kind == "trig":
            return 1.0 + abs(self.alpha)
        return float(np.max(self._blocks))

    @property
    def mean(self) -> float:
        """Cell average of ``a0`` (the squared limit value)."""
        if self.kind == "trig":
            return 1.0
        return float(np.mean(self._blocks))

    def __call__(self, x, y) -> np.ndarray:
        """Evaluate on the unit cell; arguments are reduced mod 1 first."""
        x = _frac(np.asarray(x, float))
        y = _frac(np.asarray(y, float))
        if self.kind == "trig":
            return 1.0 + self.alpha * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        k = self._blocks.shape[0]
        i = np.minimum((x * k).astype(int), k - 1)
        j = np.minimum((y * k).astype(int), k - 1)
        return self._blocks[i, j]


@dataclass(frozen=True)
class RandomCellLaw:
    support: tuple
    probabilities: tuple

    def __post_init__(self):
        s = np.asarray(self.support, float).ravel()
        p = np.asarray(self.probabilities, float).ravel()
        if s.size == 0:
            raise ValueError("random law needs a non-empty support")
        if s.size != p.size:
            raise ValueError("support and probabilities differ in length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("support values must be positive and finite")
        object.__setattr__(self, "support", tuple(s.tolist()))
        object.__setattr__(self, "probabilities", tuple(p.tolist()))

    @property
    def m(self) -> float:
        return min(self.support)

    @property
    def M(self) -> float:
        return max(self.support)

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probabilities))


@dataclass(frozen=True, eq=False)
class PinningField:
    field: ScalarField
    delta: float
    source: object
    seed: int | None = None
    shift: tuple[float, float] | None = None
    epsilon_hint: float | None = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        v = self.field.values
        if v.min() < self.m - 1e-15 or v.max() > self.M + 1e-15:
            raise ValueError("pinning values escape the bounds of their source")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def m(self) -> float:
        return self.source.m

    @property
    def M(self) -> float:
        return self.source.M

    @property
    def target_mean(self) -> float:
        return self.source.mean

    @property
    def kind(self) -> str:
        return self.source.kind if isinstance(self.source, CellFunction) else "random"


def exact_mean_intervals(cell: CellFunction, at_least: int = 32) -> int:
    """Smallest ``n ≥ at_least`` intervals per period with an exact trapezoid mean.

    For an even number ``k`` of blocks per side, ``2n/k`` odd puts every jump
    half-way between nodes and gives each block weight exactly ``1/k``, so the
    discrete mean of ``a`` equals the cell mean. This needs the value at the
    cell edge ``x = 1`` (sampled as ``x = 0``) to match the adjacent block,
    which holds for mirror-symmetric cells. No such ``n`` exists for odd
    ``k``; then ``n`` is only chosen to keep nodes off the jumps (mean error
    ``O(1/n)``). Smooth cells get the next odd ``n``.

    >>> exact_mean_intervals(CellFunction.checkerboard(0.5, 1.5, symmetric=True))
    34
    """
    k = 0 if cell.kind == "trig" else cell._blocks.shape[0]
    n = max(int(at_least), 2)
    if k <= 1:
        return n if n % 2 else n + 1
    if k % 2:
        while n % k == 0:
            n += 1
        return n
    while (2 * n) % k or ((2 * n) // k) % 2 == 0:
        n += 1
    return n


def _aliasing(delta: float, grid: Grid) -> list[str]:
    if delta < grid.h / 4:
        return [f"aliasing: delta={delta:g} is below h/4={grid.h / 4:g}; the cell is not resolved"]
    return []


def sample_periodic(
    cell: CellFunction, delta: float, grid: Grid, epsilon_hint: float | None = None
) -> PinningField:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    x, y = grid.coordinates()
    vals = cell(x / delta, y / delta)
    return PinningField(
        ScalarField(grid, np.broadcast_to(vals, grid.shape).copy()),
        float(delta),
        cell,
        epsilon_hint=epsilon_hint,
        warnings=_aliasing(delta, grid),
    )


_MASK64 = (1 << 64) - 1


def _splitmix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def cell_value_hash(seed: int, k: np.ndarray, l: np.ndarray) -> np.ndarray:
    """Uniform numbers in ``[0, 1)`` keyed by ``(seed, k, l)``."""
    k = np.asarray(k, dtype=np.int64).astype(np.uint64)
    l = np.asarray(l, dtype=np.int64).astype(np.uint64)
    z = _splitmix64(np.full(np.broadcast(k, l).shape, np.uint64(seed & _MASK64)))
    z = _splitmix64(z ^ k)
    z = _splitmix64(z ^ (l * np.uint64(0xD1B54A32D192ED03) & np.uint64(_MASK64)))
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def lattice_shift(seed: int, delta: float) -> tuple[float, float]:
    rng = np.random.Generator(np.random.Philox(seed))
    s = rng.random(2) * delta
    return float(s[0]), float(s[1])


def sample_random(
    law: RandomCellLaw,
    delta: float,
    seed: int,
    grid: Grid,
    epsilon_hint: float | None = None,
    shift: Sequence[float] | None = None,
) -> PinningField:
    """Random checkerboard on the lattice ``shift + delta Z^2``.

    Cell ``(k, l)`` covers ``shift + delta [k, k+1) x [l, l+1)``. When
    ``shift`` is omitted it is drawn from ``seed``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    s = lattice_shift(seed, delta) if shift is None else (float(shift[0]), float(shift[1]))
    x, y = grid.coordinates()
    k = np.floor((x - s[0]) / delta).astype(np.int64)
    l = np.floor((y - s[1]) / delta).astype(np.int64)
    u = cell_value_hash(seed, k, l)
    cdf = np.cumsum(law.probabilities)
    cdf[-1] = 1.0
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    vals = np.asarray(law.support)[idx]
    return PinningField(
        ScalarField(grid, vals),
        float(delta),
        law,
        seed=int(seed),
        shift=s,
        epsilon_hint=epsilon_hint,
        warnings=_aliasing(delta, grid),
    )


def empirical_mean_drift(p: PinningField) -> float:
    """``|mean of a over G - target|``; target is the cell mean or the law's expectation."""
    return abs(integrate(p.field) / p.grid.area - p.target_mean)
