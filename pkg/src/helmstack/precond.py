"""Block-acoustic preconditioner, Schur-approximation baselines and the Z operator.

All preconditioners map a residual of the mixed system ``[[A, G], [G^T, -C]]``
to a correction and are fixed linear maps, so they can be used inside
restarted GMRES.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .core import MediaModel, ModelError
from .discretize import (SaddleSystem, apply_shift, assemble_saddle, build_Ap, build_commutator,
                         build_Hp, hp_shift_mass, pressure_laplacian, shifted_saddle)
from .flops import FlopLedger
from .multigrid import SmootherParams, build_hierarchy, mg_cycle
from .sparse import csr, factorize, spmv, dense_eig, power_method

JACOBI_2D = SmootherParams("jacobi", (0.8, 0.8, 0.3))
JACOBI_3D = SmootherParams("jacobi", (0.8, 0.8, 0.2))
VANKA_2D = SmootherParams("vanka-rb", (0.65, 0.5, 0.3))


def attenuated(media: MediaModel, alpha: float, omega: float) -> MediaModel:
    """Medium whose attenuation carries the complex shift ``alpha``."""
    if not alpha:
        return media
    return media.with_(gamma=media.gamma + alpha * omega)


class _DirectSolver:
    def __init__(self, H, band_cap):
        self.factor = factorize(H, band_cap=band_cap)

    @property
    def nnz(self):
        return self.factor.nnz

    def __call__(self, b, ledger):
        return self.factor.solve(b, ledger, "direct")


class _CycleSolver:
    def __init__(self, hier):
        self.hier = hier

    @property
    def nnz(self):
        return self.hier.coarse_nnz

    def __call__(self, b, ledger):
        self.hier.ledger = ledger
        return mg_cycle(self.hier, b)


@dataclass
class BlockSolverConfig:
    """How the acoustic diagonal blocks are inverted."""
    mode: str = "direct"            # direct | multigrid
    alpha: float = 0.0
    levels: int = 2
    smoother: SmootherParams = JACOBI_2D
    cycle: str = "W"
    nu1: int = 1
    nu2: int = 2
    mixed_intergrid: bool = False
    band_cap: int = 2000

    def __post_init__(self):
        if self.mode not in ("direct", "multigrid"):
            raise ModelError(f"unknown block-solve mode {self.mode!r}")

    def build(self, H, grid, location, mass, omega):
        Hs = apply_shift(H, mass, self.alpha, omega)
        if self.mode == "direct" or self.levels <= 1:
            return _DirectSolver(Hs, self.band_cap)
        hier = build_hierarchy(Hs, grid, [location], self.levels, smoother=self.smoother,
                               cycle=self.cycle, nu1=self.nu1, nu2=self.nu2,
                               mixed_intergrid=self.mixed_intergrid, band_cap=self.band_cap)
        return _CycleSolver(hier)


def default_block_config(dim: int, mode: str = "direct", **kw) -> BlockSolverConfig:
    if dim == 3:
        kw.setdefault("smoother", JACOBI_3D)
        kw.setdefault("nu1", 2)
        kw.setdefault("nu2", 2)
        kw.setdefault("mixed_intergrid", True)
    return BlockSolverConfig(mode=mode, **kw)


class _LeadingBlockSolver:
    def __init__(self, saddle: SaddleSystem, cfg: BlockSolverConfig):
        self.saddle = saddle
        self.solvers = [cfg.build(blk, saddle.grid, a, saddle.face_rho[a], saddle.omega)
                        for a, blk in enumerate(saddle.blocks)]

    def __call__(self, v, ledger):
        off = self.saddle.offsets
        return np.concatenate([s(v[off[i]:off[i + 1]], ledger) for i, s in enumerate(self.solvers)])

    @property
    def nnz(self):
        return sum(s.nnz for s in self.solvers)


class BlockAcousticPreconditioner:
    """Distributor followed by the block upper-triangular acoustic solve.

    t = G^T r_u - A_p r_p;  e_p = H_p^-1 t;  e_u = A^-1 (r_u - G e_p).
    """

    def __init__(self, saddle: SaddleSystem, config: Optional[BlockSolverConfig] = None,
                 ap_variant: str = "right-weighted"):
        self.saddle = saddle
        self.config = config or default_block_config(saddle.grid.dim)
        self.Ap = build_Ap(saddle.media, saddle.omega, ap_variant, saddle.periodic)
        self.Hp = build_Hp(saddle, self.Ap)
        self.B = saddle.B
        self.ledger = FlopLedger()
        self.leading = _LeadingBlockSolver(saddle, self.config)
        self.hp_solver = self.config.build(self.Hp, saddle.grid, "cell", hp_shift_mass(saddle),
                                           saddle.omega)
        self.applications = 0

    @property
    def n_solvers(self) -> int:
        return len(self.leading.solvers) + 1

    @property
    def coarse_nnz(self) -> int:
        return self.leading.nnz + self.hp_solver.nnz

    def __call__(self, r):
        s, led = self.saddle, self.ledger
        ru, rp = r[:s.n], r[s.n:]
        t = spmv(self.B, ru, led, "rhs") - spmv(self.Ap, rp, led, "rhs")
        ep = self.hp_solver(t, led)
        v = ru - spmv(s.G, ep, led, "backsub")
        eu = self.leading(v, led)
        self.applications += 1
        return np.concatenate([eu, ep])


class SchurApproxPreconditioner:
    """Upper block-triangular preconditioner with an approximate Schur complement.

    ``fp``:   S^-1 ~ A_p (G^T G)^-1
    ``bfbt``: S^-1 ~ (G^T G)^-1 (G^T A G) (G^T G)^-1
    The regularisation block C is ignored inside the approximation.
    """

    def __init__(self, saddle: SaddleSystem, kind: str = "fp",
                 config: Optional[BlockSolverConfig] = None, ap_variant: str = "right-weighted"):
        if kind not in ("fp", "bfbt"):
            raise ModelError(f"unknown Schur approximation {kind!r}")
        self.saddle = saddle
        self.kind = kind
        self.config = config or default_block_config(saddle.grid.dim)
        self.ledger = FlopLedger()
        self.leading = _LeadingBlockSolver(saddle, self.config)
        self.lap = factorize(pressure_laplacian(saddle), band_cap=self.config.band_cap)
        if kind == "fp":
            self.Ap = build_Ap(saddle.media, saddle.omega, ap_variant, saddle.periodic)
        else:
            self.middle = csr(saddle.G.T @ saddle.A @ saddle.G)
        self.applications = 0

    def schur_inverse(self, t):
        led = self.ledger
        w = self.lap.solve(t, led, "direct")
        if self.kind == "fp":
            return spmv(self.Ap, w, led, "schur")
        return self.lap.solve(spmv(self.middle, w, led, "schur"), led, "direct")

    def __call__(self, r):
        s = self.saddle
        ru, rp = r[:s.n], r[s.n:]
        ep = -self.schur_inverse(rp)
        eu = self.leading(ru - spmv(s.G, ep, self.ledger, "backsub"), self.ledger)
        self.applications += 1
        return np.concatenate([eu, ep])


class MonolithicPreconditioner:
    """One W(1,1) Vanka cycle on the mixed system with the leading-block shift."""

    def __init__(self, saddle: SaddleSystem, alpha: float = 0.1, levels: int = 2,
                 smoother: SmootherParams = VANKA_2D, cycle: str = "W", nu1: int = 1,
                 nu2: int = 1, band_cap: int = 4000):
        self.saddle = saddle
        locs = list(range(saddle.grid.dim)) + ["cell"]
        K = shifted_saddle(saddle, alpha)
        self.hier = build_hierarchy(K, saddle.grid, locs, levels, smoother=smoother, cycle=cycle,
                                    nu1=nu1, nu2=nu2, mixed_intergrid=True, band_cap=band_cap)
        self.ledger = self.hier.ledger
        self.applications = 0

    @property
    def coarse_nnz(self) -> int:
        return self.hier.coarse_nnz

    def __call__(self, r):
        self.applications += 1
        return mg_cycle(self.hier, r)


def make_preconditioner(kind: str, saddle: SaddleSystem, config: Optional[BlockSolverConfig] = None,
                        alpha: float = 0.1, levels: int = 2, ap_variant: str = "right-weighted"):
    if kind == "block-acoustic":
        return BlockAcousticPreconditioner(saddle, config, ap_variant)
    if kind in ("fp", "bfbt"):
        return SchurApproxPreconditioner(saddle, kind, config, ap_variant)
    if kind == "monolithic":
        return MonolithicPreconditioner(saddle, alpha=alpha, levels=levels)
    if kind == "none":
        return None
    raise ModelError(f"unknown preconditioner {kind!r}")


# ---------------------------------------------------------------------------
# analysis operators

class ZOperator:
    """Matrix-free Z = Xi A^-1 G H_p^-1 with exact banded-LU inner solves."""

    def __init__(self, media: MediaModel, omega: float, alpha: float = 0.0,
                 ap_variant: str = "right-weighted", periodic: bool = False,
                 band_cap: int = 4000):
        self.media = attenuated(media, alpha, omega)
        self.alpha = alpha
        self.saddle = assemble_saddle(self.media, omega, periodic)
        self.Ap = build_Ap(self.media, omega, ap_variant, periodic)
        self.Hp = build_Hp(self.saddle, self.Ap)
        self.comm = build_commutator(self.saddle, self.Ap)
        self.xi = self.comm.xi
        self.A_solvers = [factorize(b, band_cap=band_cap) for b in self.saddle.blocks]
        self.Hp_solver = factorize(self.Hp, band_cap=band_cap)

    @property
    def m(self) -> int:
        return self.saddle.m

    def solve_A(self, v):
        off = self.saddle.offsets
        return np.concatenate([f.solve(v[off[i]:off[i + 1]]) for i, f in enumerate(self.A_solvers)])

    def matvec(self, v):
        w = self.Hp_solver.solve(np.asarray(v, dtype=np.complex128))
        return self.xi @ self.solve_A(self.saddle.G @ w)

    __call__ = matvec

    def dense(self) -> np.ndarray:
        m = self.m
        out = np.empty((m, m), dtype=np.complex128)
        e = np.zeros(m, dtype=np.complex128)
        for j in range(m):
            e[j] = 1.0
            out[:, j] = self.matvec(e)
            e[j] = 0.0
        return out

    def spectral_radius(self, tol=1e-4, max_iter=500, seed=0):
        return power_method(self.matvec, self.m, tol=tol, max_iter=max_iter, seed=seed)


def z_matvec(zop: ZOperator, v):
    return zop.matvec(v)


def hausdorff(a, b) -> float:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size == 0 or b.size == 0:
        return 0.0 if a.size == b.size else np.inf
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass
class TheoremReport:
    n: int
    m: int
    eig_T: np.ndarray
    eig_Z: np.ndarray
    eig_Y: np.ndarray
    rho_Z_dense: float
    rho_Z_power: float
    power_iterations: int
    hausdorff_TZ: float
    hausdorff_YZ: float
    unit_multiplicity: int
    tol: float = 1e-6

    @property
    def spectra_match(self) -> bool:
        return self.hausdorff_TZ <= self.tol * (1 + self.rho_Z_dense)

    @property
    def yz_match(self) -> bool:
        return self.hausdorff_YZ <= self.tol * (1 + self.rho_Z_dense)

    @property
    def multiplicity_ok(self) -> bool:
        return self.unit_multiplicity >= self.n

    @property
    def power_rel_error(self) -> float:
        return abs(self.rho_Z_power - self.rho_Z_dense) / max(self.rho_Z_dense, 1e-300)

    def as_dict(self):
        return dict(n=self.n, m=self.m, rho_Z_dense=self.rho_Z_dense,
                    rho_Z_power=self.rho_Z_power, power_iterations=self.power_iterations,
                    hausdorff_TZ=self.hausdorff_TZ, hausdorff_YZ=self.hausdorff_YZ,
                    unit_multiplicity=self.unit_multiplicity, spectra_match=self.spectra_match,
                    yz_match=self.yz_match, multiplicity_ok=self.multiplicity_ok,
                    power_rel_error=self.power_rel_error)


def build_T_and_verify(media: MediaModel, omega: float, alpha: float = 0.0, tol: float = 1e-6,
                       max_cells: int = 400, power_tol: float = 1e-6,
                       power_max_iter: int = 5000) -> TheoremReport:
    """Dense check that the spectrum of I - P^-1 K is that of Z plus zeros on a tiny grid."""
    if media.grid.n_cells > max_cells:
        raise ModelError(f"grid too large for dense verification ({media.grid.n_cells} cells)")
    zop = ZOperator(media, omega, alpha)
    s = zop.saddle
    n, m = s.n, s.m
    A = s.A.toarray()
    G = s.G.toarray()
    Hp = zop.Hp.toarray()
    Xi = zop.xi.toarray()
    K = np.block([[A, G], [Xi, Hp]])
    P = np.block([[A, G], [np.zeros((m, n)), Hp]])
    PK = np.linalg.solve(P, K)
    eig_PK = dense_eig(PK)
    eig_T = 1.0 - eig_PK
    Z = zop.dense()
    eig_Z = dense_eig(Z)
    Y = np.linalg.solve(A, G @ np.linalg.solve(Hp, Xi))
    eig_Y = dense_eig(Y)
    rho = float(np.abs(eig_Z).max())
    pw = power_method(zop.matvec, m, tol=power_tol, max_iter=power_max_iter)
    zero = np.zeros(1)
    return TheoremReport(
        n=n, m=m, eig_T=eig_T, eig_Z=eig_Z, eig_Y=eig_Y, rho_Z_dense=rho,
        rho_Z_power=pw.rho, power_iterations=pw.iterations,
        hausdorff_TZ=hausdorff(eig_T, np.concatenate([eig_Z, zero])),
        hausdorff_YZ=hausdorff(np.concatenate([eig_Y, zero]), np.concatenate([eig_Z, zero])),
        unit_multiplicity=int(np.sum(np.abs(eig_PK - 1.0) <= tol)), tol=tol)
