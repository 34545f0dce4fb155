"""Three-dimensional configuration of the block-acoustic solver.

The discretization code is dimension-generic; this module fixes the 3D
layout, the 3D multigrid defaults (mixed intergrid, Jacobi W(2,2) with
damping 0.8/0.8/0.2) and a one-call solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import Grid, MediaModel, ModelError, select_omega
from .discretize import SaddleSystem, assemble_saddle, point_source
from .krylov import KrylovConfig, SolverReport, gmres_solve
from .precond import BlockAcousticPreconditioner, default_block_config

# coarsest systems larger than this (cells) are refused: a 64x64x32 grid at 2 levels
MAX_COARSE_CELLS_3D = 32 * 32 * 16


@dataclass(frozen=True)
class Grid3Layout:
    face_counts: Tuple[int, int, int]
    n_cells: int

    @classmethod
    def of(cls, grid: Grid) -> "Grid3Layout":
        if grid.dim != 3:
            raise ModelError("Grid3Layout needs a 3D grid")
        return cls(tuple(grid.face_counts()), grid.n_cells)

    @property
    def n(self) -> int:
        return sum(self.face_counts)

    @property
    def m(self) -> int:
        return self.n_cells


def assemble_saddle_3d(media: MediaModel, omega: float, periodic: bool = False) -> SaddleSystem:
    if media.grid.dim != 3:
        raise ModelError(f"expected a 3D model, got dim={media.grid.dim}")
    return assemble_saddle(media, omega, periodic)


def solve_3d_default(media: MediaModel, levels: int = 2, alpha: float = 0.1,
                     omega: Optional[float] = None, rhs=None,
                     krylov: Optional[KrylovConfig] = None):
    """Block-acoustic multigrid GMRES(5) solve for the top-centre point source.

    Returns ``(x, report, preconditioner)``.
    """
    g = media.grid
    if g.dim != 3:
        raise ModelError(f"expected a 3D model, got dim={g.dim}")
    g.check_levels(levels)
    coarse = g.n_cells // 8 ** (levels - 1)
    if coarse > MAX_COARSE_CELLS_3D:
        raise ModelError(f"coarsest grid has {coarse} cells; desk-scale limit is "
                         f"{MAX_COARSE_CELLS_3D} (use more levels or a smaller grid)")
    omega = select_omega(media) if omega is None else omega
    saddle = assemble_saddle_3d(media, omega)
    prec = BlockAcousticPreconditioner(
        saddle, default_block_config(3, "multigrid" if levels > 1 else "direct",
                                     alpha=alpha, levels=levels))
    b = point_source(g) if rhs is None else rhs
    x, rep = gmres_solve(saddle.full(), b, prec, krylov or KrylovConfig(restart=5))
    return x, rep, prec
