"""Pinned Ginzburg-Landau numerical laboratory.

Submodules: :mod:`mesh` (grids, fields, discrete operators), :mod:`pinning`
(periodic and random pinning terms), :mod:`scalar` (the positive scalar
minimizer and the unit-cell problem), :mod:`magnetic` (the gauged functional),
:mod:`limits` (limit models and critical fields), :mod:`allencahn` and
:mod:`lab` (sweeps, fits and the CLI plumbing).
"""

from .allencahn import ACSolve, minimize_ac
from .magnetic import GLState, gl_energy, minimize_gl, vorticity
from .mesh import ComplexField, Grid, ScalarField, build_grid
from .pinning import CellFunction, PinningField, RandomCellLaw, sample_periodic, sample_random
from .scalar import ScalarSolve, cell_minimize, minimize_scalar, tile_cell

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "ScalarField",
    "ComplexField",
    "build_grid",
    "CellFunction",
    "RandomCellLaw",
    "PinningField",
    "sample_periodic",
    "sample_random",
    "ScalarSolve",
    "minimize_scalar",
    "cell_minimize",
    "tile_cell",
    "GLState",
    "gl_energy",
    "minimize_gl",
    "vorticity",
    "ACSolve",
    "minimize_ac",
]
