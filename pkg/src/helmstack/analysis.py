"""Spectral diagnostics of Z, shift sweeps and per-cycle cost tables."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import MediaModel, ModelError, slice_media
from .discretize import assemble_saddle
from .flops import FlopLedger
from .precond import (BlockAcousticPreconditioner, BlockSolverConfig, MonolithicPreconditioner,
                      ZOperator, default_block_config)
from .sparse import PowerResult, dense_eig, factorize

__all__ = ["SpectrumReport", "spectrum_of_Z", "rho_z_sweep", "write_sweep_csv", "FlopRow",
           "FlopTable", "measure_cycle_cost", "flop_table", "slice_media",
           "acoustic_reduction_residual"]


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    media_name: str
    slice_dims: Tuple[int, ...]
    gs: Optional[float]
    shift: float

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if self.eigenvalues.size else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im"])
            for z in self.eigenvalues:
                w.writerow([repr(float(z.real)), repr(float(z.imag))])


def spectrum_of_Z(media: MediaModel, omega: float, shift: float = 0.0, cap: int = 2500,
                  gs: Optional[float] = None, periodic: bool = False) -> SpectrumReport:
    """All eigenvalues of the densely formed Z (one column per unit vector)."""
    m = media.grid.n_cells
    if m > cap:
        raise ModelError(f"Z would be {m}x{m}; eigensolver cap is {cap}")
    zop = ZOperator(media, omega, shift, periodic=periodic)
    eigs = dense_eig(zop.dense(), cap=cap)
    return SpectrumReport(eigs, media.name, media.grid.cells, gs, shift)


def rho_z_sweep(media: MediaModel, omega: float, shifts: Sequence[float], tol: float = 1e-4,
                max_iter: int = 500, seed: int = 0) -> List[Tuple[float, PowerResult]]:
    """Power-method spectral radius of the shifted Z for each shift."""
    out = []
    for a in shifts:
        zop = ZOperator(media, omega, float(a))
        out.append((float(a), zop.spectral_radius(tol=tol, max_iter=max_iter, seed=seed)))
    return out


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "rho"])
        for a, res in rows:
            w.writerow([a, repr(float(res.rho))])


# ---------------------------------------------------------------------------
# cost tables

@dataclass
class FlopRow:
    label: str
    grid: Tuple[int, ...]
    levels: int
    cycle_per_cell: float
    coarse_nnz_per_cell: float
    breakdown: Dict[str, float] = field(default_factory=dict)

    @property
    def total_per_cell(self) -> float:
        return self.cycle_per_cell + self.coarse_nnz_per_cell


@dataclass
class FlopTable:
    rows: List[FlopRow]

    def coarse_ratio(self, numerator: str, denominator: str) -> float:
        by = {r.label: r for r in self.rows}
        return by[numerator].coarse_nnz_per_cell / by[denominator].coarse_nnz_per_cell

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["config", "grid", "levels", "cycle_per_cell", "coarse_nnz_per_cell",
                        "total_per_cell"])
            for r in self.rows:
                w.writerow([r.label, "x".join(map(str, r.grid)), r.levels,
                            f"{r.cycle_per_cell:.4f}", f"{r.coarse_nnz_per_cell:.4f}",
                            f"{r.total_per_cell:.4f}"])


SOLVE_CATEGORIES = ("coarse", "direct")


def measure_cycle_cost(prec, n_cells: int, seed: int = 0) -> Tuple[float, float, Dict[str, float]]:
    """Apply ``prec`` once to a random residual and read its FLOP ledger.

    Returns (cycle FLOPs per cell without factor solves, factor nnz per cell,
    per-category breakdown per cell).
    """
    N = prec.saddle.n + prec.saddle.m
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    prec.ledger.reset()
    prec(r)
    snap = prec.ledger.snapshot()
    cycle = sum(v for k, v in snap.items() if k not in SOLVE_CATEGORIES)
    return cycle / n_cells, prec.coarse_nnz / n_cells, {k: v / n_cells for k, v in snap.items()}


def flop_table(configs: Iterable[dict]) -> FlopTable:
    """Rows for configs ``dict(label, media, omega, kind, levels, alpha)``.

    ``kind`` is ``block-acoustic`` (per-block Jacobi W(1,2) cycles) or
    ``monolithic`` (Vanka W(1,1)).
    """
    rows = []
    for c in configs:
        media = c["media"]
        saddle = assemble_saddle(media, c["omega"])
        levels = int(c.get("levels", 2))
        alpha = float(c.get("alpha", 0.1))
        if c["kind"] == "block-acoustic":
            cfg = default_block_config(media.grid.dim, "multigrid", alpha=alpha, levels=levels)
            prec = BlockAcousticPreconditioner(saddle, cfg)
        elif c["kind"] == "monolithic":
            prec = MonolithicPreconditioner(saddle, alpha=alpha, levels=levels)
        else:
            raise ModelError(f"unknown cost-table config kind {c['kind']!r}")
        cyc, coarse, parts = measure_cycle_cost(prec, media.grid.n_cells)
        rows.append(FlopRow(c.get("label", c["kind"]), media.grid.cells, levels, cyc, coarse,
                            parts))
    return FlopTable(rows)


# ---------------------------------------------------------------------------
# incompressible-limit check

def acoustic_reduction_residual(media: MediaModel, omega: float, periodic: bool = True,
                                seed: int = 0) -> float:
    """Relative residual of ``p = lambda G^T u`` in the pressure-only Helmholtz system.

    Requires mu = 0. The mixed system is solved directly for a random face
    load q; then ``G^T M^-1 G p - omega^2 C p = G^T M^-1 q`` must hold.
    """
    if np.any(media.mu != 0):
        raise ModelError("the acoustic reduction needs mu = 0")
    s = assemble_saddle(media, omega, periodic)
    rng = np.random.default_rng(seed)
    q = np.zeros(s.n + s.m, dtype=np.complex128)
    q[:s.n] = rng.standard_normal(s.n) + 1j * rng.standard_normal(s.n)
    sol = factorize(s.full(), band_cap=10 ** 6, dense_cap=20000).solve(q)
    u = sol[:s.n]
    lam = s.grid.flat(media.lam)
    p = lam * (s.G.T @ u)
    minv = 1.0 / np.concatenate(s.face_mass)
    lhs = s.G.T @ (minv * (s.G @ p)) - omega ** 2 * (s.C @ p)
    rhs = s.G.T @ (minv * q[:s.n])
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
