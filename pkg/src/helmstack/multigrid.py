"""Geometric multigrid on the staggered grid.

Hierarchies are Galerkin (coarse = R H P) on the shifted operator, with
damped Jacobi for the per-block acoustic solvers and red-black cell-wise
Vanka for the monolithic saddle operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .core import Grid, ModelError
from .flops import FlopLedger
from .sparse import csr, factorize, kron1d, spmv, triple_product

Location = Union[int, str]

# FLOP surcharge per cell for one Vanka sweep beyond the residual.
VANKA_CELL_FLOPS = {2: 17, 3: 31}


# ---------------------------------------------------------------------------
# intergrid operators

def build_restriction_1d(kind: str, fine_size: int) -> sp.csr_matrix:
    """1D restriction; ``fine_size`` counts nodes (nodal kinds) or cells."""
    if kind == "nodal-121":
        if fine_size < 3 or fine_size % 2 == 0:
            raise ModelError(f"nodal restriction needs an odd node count >= 3, got {fine_size}")
        nc = (fine_size + 1) // 2
        offsets, weights = (-1, 0, 1), (0.25, 0.5, 0.25)
        centre = 2 * np.arange(nc)
    elif kind in ("cell-1331", "cell-11"):
        if fine_size < 2 or fine_size % 2:
            raise ModelError(f"cell restriction needs an even cell count, got {fine_size}")
        nc = fine_size // 2
        centre = 2 * np.arange(nc)
        if kind == "cell-1331":
            offsets, weights = (-1, 0, 1, 2), (0.125, 0.375, 0.375, 0.125)
        else:
            offsets, weights = (0, 1), (0.5, 0.5)
    else:
        raise ModelError(f"unknown restriction kind {kind!r}")
    rows, cols, vals = [], [], []
    for off, w in zip(offsets, weights):
        c = centre + off
        ok = (c >= 0) & (c < fine_size)
        rows.append(np.arange(nc)[ok])
        cols.append(c[ok])
        vals.append(np.full(ok.sum(), w))
    r = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nc, fine_size))
    r.sort_indices()
    return r


@dataclass(frozen=True)
class IntergridSpec:
    """Per-axis 1D kinds for restriction and for the prolongation ``P = 2 (.)^T``."""
    restrict: Tuple[str, ...]
    prolong: Tuple[str, ...]


def staggered_intergrid(dim: int, location: Location, mixed: bool = False) -> IntergridSpec:
    full, rest = [], []
    for ax in range(dim):
        if location != "cell" and ax == int(location):
            full.append("nodal-121")
            rest.append("nodal-121")
        else:
            full.append("cell-1331")
            rest.append("cell-11" if mixed else "cell-1331")
    return IntergridSpec(tuple(rest), tuple(full))


def _axis_sizes(grid: Grid, location: Location):
    return [n + 1 if (location != "cell" and ax == int(location)) else n
            for ax, n in enumerate(grid.cells)]


def build_transfer(grid: Grid, location: Location, spec: IntergridSpec):
    sizes = _axis_sizes(grid, location)
    R = kron1d(*[build_restriction_1d(k, n) for k, n in zip(spec.restrict, sizes)])
    if spec.prolong == spec.restrict:
        P = csr(2.0 * R.T)
    else:
        Rf = kron1d(*[build_restriction_1d(k, n) for k, n in zip(spec.prolong, sizes)])
        P = csr(2.0 * Rf.T)
    return R, P


# ---------------------------------------------------------------------------
# smoothers

@dataclass(frozen=True)
class SmootherParams:
    kind: str = "jacobi"
    damping: Tuple[float, ...] = (0.8, 0.8, 0.3)

    def __post_init__(self):
        if self.kind not in ("jacobi", "vanka-rb"):
            raise ModelError(f"unknown smoother {self.kind!r}")
        if not self.damping or any(not (0 < w <= 1) for w in self.damping):
            raise ModelError("damping parameters must lie in (0, 1]")

    def at(self, level: int) -> float:
        return self.damping[min(level, len(self.damping) - 1)]


def jacobi_sweep(H, x, b, damping, inv_diag=None, ledger: Optional[FlopLedger] = None):
    """x + damping * D^-1 (b - H x), in place on ``x``."""
    if inv_diag is None:
        d = H.diagonal()
        if np.any(d == 0):
            raise ModelError("Jacobi needs a nonzero diagonal")
        inv_diag = 1.0 / d
    _kernels.jacobi_sweep(H.indptr, H.indices, H.data, inv_diag, x, b, damping)
    if ledger is not None:
        ledger.add("smooth", H.nnz + H.shape[0])
    return x


def vanka_dofs(grid: Grid, n_u: Optional[int] = None) -> np.ndarray:
    """Unknowns of each cell's local saddle block: 2d faces then the pressure."""
    cells = grid.cells
    idx = np.indices(cells).reshape(grid.dim, -1, order="F")
    cols = []
    off = 0
    for a in range(grid.dim):
        shape = grid.face_shape(a)
        lo = np.ravel_multi_index(idx, shape, order="F")
        up = idx.copy()
        up[a] += 1
        hi = np.ravel_multi_index(up, shape, order="F")
        cols += [off + lo, off + hi]
        off += int(np.prod(shape))
    if n_u is not None and n_u != off:
        raise ModelError("face count does not match the operator layout")
    cols.append(off + np.arange(grid.n_cells))
    return np.ascontiguousarray(np.stack(cols, axis=1).astype(np.int64))


def cell_colors(grid: Grid) -> List[np.ndarray]:
    idx = np.indices(grid.cells).reshape(grid.dim, -1, order="F")
    par = idx.sum(axis=0) % 2
    return [np.nonzero(par == c)[0].astype(np.int64) for c in (0, 1)]


@dataclass
class VankaData:
    dofs: np.ndarray
    inv_blocks: np.ndarray
    colors: List[np.ndarray]
    n_cells: int
    dim: int


def setup_vanka(K, grid: Grid) -> VankaData:
    K = sp.csr_matrix(K)
    n_u = K.shape[0] - grid.n_cells
    dofs = vanka_dofs(grid, n_u)
    nc, k = dofs.shape
    blocks = np.empty((nc, k, k), dtype=np.complex128)
    for p in range(k):
        for q in range(k):
            blocks[:, p, q] = np.asarray(K[dofs[:, p], dofs[:, q]]).ravel()
    scale = np.abs(blocks).reshape(nc, -1).max(axis=1)
    scale[scale == 0] = 1.0
    det = np.abs(np.linalg.det(blocks / scale[:, None, None]))
    bad = np.nonzero(~(det > 1e-13))[0]
    if bad.size:
        cell = np.unravel_index(int(bad[0]), grid.cells, order="F")
        raise ModelError(f"singular Vanka block at cell {tuple(int(c) for c in cell)}")
    inv = np.ascontiguousarray(np.linalg.inv(blocks))
    return VankaData(dofs, inv, cell_colors(grid), grid.n_cells, grid.dim)


def vanka_rb_sweep(K, x, b, damping, data: VankaData, ledger: Optional[FlopLedger] = None):
    """Red then black additive cell-wise local solves, in place on ``x``."""
    for cells in data.colors:
        r = b - _kernels.csr_matvec(K.indptr, K.indices, K.data, x)
        _kernels.vanka_update(x, r, data.dofs, data.inv_blocks, cells, damping)
    if ledger is not None:
        ledger.add("smooth", K.nnz + VANKA_CELL_FLOPS[data.dim] * data.n_cells)
    return x


# ---------------------------------------------------------------------------
# hierarchy

@dataclass
class Level:
    grid: Grid
    op: sp.csr_matrix
    R: Optional[sp.csr_matrix] = None
    P: Optional[sp.csr_matrix] = None
    damping: float = 0.8
    inv_diag: Optional[np.ndarray] = None
    vanka: Optional[VankaData] = None


@dataclass
class MgHierarchy:
    levels: List[Level]
    coarse: object
    smoother: SmootherParams
    cycle: str = "W"
    nu1: int = 1
    nu2: int = 2
    ledger: FlopLedger = field(default_factory=FlopLedger)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def coarse_nnz(self) -> int:
        return self.coarse.nnz

    def smooth(self, lvl: Level, x, b, sweeps):
        for _ in range(sweeps):
            if self.smoother.kind == "jacobi":
                jacobi_sweep(lvl.op, x, b, lvl.damping, lvl.inv_diag, self.ledger)
            else:
                vanka_rb_sweep(lvl.op, x, b, lvl.damping, lvl.vanka, self.ledger)
        return x

    def solve_coarse(self, b):
        return self.coarse.solve(b, self.ledger, "coarse")

    def __call__(self, b):
        return mg_cycle(self, b)


def _block_transfer(grid: Grid, locations: Sequence[Location], mixed: bool,
                    prolong_mixed: bool = False):
    Rs, Ps = [], []
    for loc in locations:
        spec = staggered_intergrid(grid.dim, loc, mixed)
        if prolong_mixed:
            spec = IntergridSpec(spec.restrict, spec.restrict)
        R, P = build_transfer(grid, loc, spec)
        Rs.append(R)
        Ps.append(P)
    if len(Rs) == 1:
        return Rs[0], Ps[0]
    return csr(sp.block_diag(Rs)), csr(sp.block_diag(Ps))


def build_hierarchy(H, grid: Grid, locations: Sequence[Location], levels: int,
                    smoother: Optional[SmootherParams] = None, cycle: str = "W",
                    nu1: int = 1, nu2: int = 2, mixed_intergrid: bool = False,
                    band_cap: int = 2000) -> MgHierarchy:
    """Galerkin hierarchy on ``H`` (already shifted by the caller).

    ``locations`` lists the staggering of each diagonal block of ``H``
    (face axis or ``"cell"``); several entries give a monolithic hierarchy.
    """
    grid.check_levels(levels)
    smoother = smoother or SmootherParams()
    if cycle not in ("V", "W"):
        raise ModelError(f"unknown cycle {cycle!r}")
    op = csr(H)
    lv: List[Level] = []
    g = grid
    for ell in range(levels):
        lvl = Level(g, op, damping=smoother.at(ell))
        if ell < levels - 1:
            if smoother.kind == "jacobi":
                d = op.diagonal()
                if np.any(d == 0):
                    raise ModelError(f"zero diagonal on level {ell}")
                lvl.inv_diag = np.ascontiguousarray(1.0 / d)
            else:
                lvl.vanka = setup_vanka(op, g)
            lvl.R, lvl.P = _block_transfer(g, locations, mixed_intergrid)
            op = triple_product(lvl.R, op, lvl.P)
            g = g.coarsen()
        lv.append(lvl)
    coarse = factorize(lv[-1].op, band_cap=band_cap)
    return MgHierarchy(lv, coarse, smoother, cycle, nu1, nu2)


def mg_cycle(hier: MgHierarchy, b, x0=None, cycle: Optional[str] = None,
             nu1: Optional[int] = None, nu2: Optional[int] = None):
    """One V or W cycle (recursive two-grid scheme) from initial guess ``x0``."""
    cycle = cycle or hier.cycle
    nu1 = hier.nu1 if nu1 is None else nu1
    nu2 = hier.nu2 if nu2 is None else nu2
    calls = 1 if cycle == "V" else 2
    led = hier.ledger

    def rec(ell, rhs, x):
        if ell == hier.n_levels - 1:
            return hier.solve_coarse(rhs)
        lvl = hier.levels[ell]
        x = np.zeros(rhs.shape[0], dtype=np.complex128) if x is None else x
        hier.smooth(lvl, x, rhs, nu1)
        r = rhs - spmv(lvl.op, x, led, "residual")
        rc = spmv(lvl.R, r, led, "restrict")
        if ell + 1 == hier.n_levels - 1:
            ec = hier.solve_coarse(rc)
        else:
            ec = None
            for _ in range(calls):
                ec = rec(ell + 1, rc, ec)
        x += spmv(lvl.P, ec, led, "prolong")
        hier.smooth(lvl, x, rhs, nu2)
        return x

    b = np.asarray(b, dtype=np.complex128)
    x = None if x0 is None else np.array(x0, dtype=np.complex128)
    return rec(0, b, x)
