"""Staggered-grid operators of the mixed elastic Helmholtz system.

Pressure and all coefficients live at cell centres, displacement component
``a`` on the faces normal to axis ``a``. Off-grid pressure ghosts are zero;
the periodic variant exists for property tests only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .core import Grid, MediaModel, ModelError
from .sparse import csr, kron1d


# ---------------------------------------------------------------------------
# 1D building blocks

def _grad_c2n(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    """Cells -> nodes difference, node k = (c[k] - c[k-1]) / h."""
    if periodic:
        d = sp.eye(n) - sp.eye(n, k=-1)
        d = d.tolil()
        d[0, n - 1] = -1.0
        return sp.csr_matrix(d) / h
    return sp.csr_matrix(sp.eye(n + 1, n) - sp.eye(n + 1, n, k=-1)) / h


def _avg_c2n(n: int, periodic: bool) -> sp.csr_matrix:
    """Cells -> nodes mean of the available neighbours."""
    if periodic:
        a = (sp.eye(n) + sp.eye(n, k=-1)).tolil()
        a[0, n - 1] = 1.0
        return sp.csr_matrix(a) * 0.5
    a = sp.csr_matrix(sp.eye(n + 1, n) + sp.eye(n + 1, n, k=-1))
    return sp.csr_matrix(sp.diags(1.0 / np.asarray(a.sum(axis=1)).ravel()) @ a)


def _eye(n):
    return sp.identity(n, format="csr")


def _per_axis(grid: Grid, periodic: bool, replace: Dict[int, sp.spmatrix], node_axes=()):
    ops = []
    for ax, n in enumerate(grid.cells):
        if ax in replace:
            ops.append(replace[ax])
        else:
            ops.append(_eye(n + 1 if (ax in node_axes and not periodic) else n))
    return kron1d(*ops)


# ---------------------------------------------------------------------------
# grid operators

def build_gradient(grid: Grid, periodic: bool = False) -> sp.csr_matrix:
    """Cell-to-face gradient G (all face families stacked); B = G^T."""
    parts = [_per_axis(grid, periodic, {a: _grad_c2n(grid.cells[a], grid.spacing[a], periodic)})
             for a in range(grid.dim)]
    return csr(sp.vstack(parts))


def face_average(grid: Grid, axis: int, periodic: bool = False) -> sp.csr_matrix:
    return _per_axis(grid, periodic, {axis: _avg_c2n(grid.cells[axis], periodic)})


def edge_average(grid: Grid, a: int, b: int, periodic: bool = False) -> sp.csr_matrix:
    """Cells -> locations of d(u_a)/dx_b; identity when ``a == b``."""
    if a == b:
        return _eye(grid.n_cells)
    return _per_axis(grid, periodic, {a: _avg_c2n(grid.cells[a], periodic),
                                      b: _avg_c2n(grid.cells[b], periodic)})


def build_averaging(grid: Grid, periodic: bool = False):
    """Return ``(A_e, A_f)``: dicts keyed by ``(a, b)`` and by face axis ``a``."""
    a_f = {a: face_average(grid, a, periodic) for a in range(grid.dim)}
    a_e = {(a, b): edge_average(grid, a, b, periodic)
           for a in range(grid.dim) for b in range(grid.dim)}
    return a_e, a_f


def component_derivative(grid: Grid, a: int, b: int, periodic: bool = False) -> sp.csr_matrix:
    """Derivative along axis ``b`` of a field on the faces normal to ``a``."""
    if a == b:
        d = -_grad_c2n(grid.cells[a], grid.spacing[a], periodic).T
        return _per_axis(grid, periodic, {a: sp.csr_matrix(d)})
    return _per_axis(grid, periodic, {b: _grad_c2n(grid.cells[b], grid.spacing[b], periodic)},
                     node_axes=(a,))


def _check_omega(omega, gamma):
    if omega < 0:
        raise ModelError("omega must be non-negative")
    if omega == 0 and np.any(np.asarray(gamma) > 0):
        raise ModelError("attenuation term undefined at omega = 0")


def complex_mass(rho, gamma, omega):
    """rho * (1 - (gamma/omega) i), or rho when omega = 0 and gamma = 0."""
    _check_omega(omega, gamma)
    if omega == 0:
        return np.asarray(rho, dtype=np.complex128)
    return rho * (1.0 - 1j * np.asarray(gamma) / omega)


@dataclass(frozen=True)
class AcousticOperatorSpec:
    """Coefficients of one acoustic Helmholtz block.

    ``stiffness`` is the cell-centred weight of the Laplacian (mu for the
    shear blocks); ``location`` is a face axis or ``"cell"``.
    """
    grid: Grid
    stiffness: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    omega: float
    location: object = 0
    periodic: bool = False

    @property
    def slowness(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.sqrt(np.asarray(self.rho) / np.asarray(self.stiffness))


def assemble_block(spec: AcousticOperatorSpec) -> sp.csr_matrix:
    """D^T diag(weights) D - omega^2 M on the staggering given by ``spec.location``."""
    g, per = spec.grid, spec.periodic
    mu = g.flat(spec.stiffness)
    rho = g.flat(spec.rho)
    gam = g.flat(spec.gamma)
    if spec.location == "cell":
        grad = build_gradient(g, per)
        wf = np.concatenate([face_average(g, a, per) @ mu for a in range(g.dim)])
        stiff = grad.T @ sp.diags(wf) @ grad
        mass = complex_mass(rho, gam, spec.omega)
        return csr(stiff - spec.omega ** 2 * sp.diags(mass))
    a = int(spec.location)
    stiff = None
    for b in range(g.dim):
        d = component_derivative(g, a, b, per)
        w = edge_average(g, a, b, per) @ mu
        term = d.T @ sp.diags(w) @ d
        stiff = term if stiff is None else stiff + term
    af = face_average(g, a, per)
    mass = complex_mass(af @ rho, af @ gam, spec.omega)
    return csr(stiff - spec.omega ** 2 * sp.diags(mass))


# ---------------------------------------------------------------------------
# the saddle system

@dataclass
class SaddleSystem:
    grid: Grid
    omega: float
    media: MediaModel
    blocks: List[sp.csr_matrix]
    G: sp.csr_matrix
    C: sp.csr_matrix
    face_mass: List[np.ndarray]     # complex rho_f (1 - i gamma_f / omega) per family
    face_rho: List[np.ndarray]      # real face densities (shift masses)
    periodic: bool = False
    _full: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def sizes(self) -> List[int]:
        return [b.shape[0] for b in self.blocks]

    @property
    def offsets(self) -> List[int]:
        return list(np.cumsum([0] + self.sizes))

    @property
    def A(self) -> sp.csr_matrix:
        return csr(sp.block_diag(self.blocks))

    @property
    def B(self) -> sp.csr_matrix:
        return csr(self.G.T)

    @property
    def M(self) -> sp.csr_matrix:
        return sp.diags(np.concatenate(self.face_mass)).tocsr()

    @property
    def Mp(self) -> sp.csr_matrix:
        g = self.grid
        return sp.diags(complex_mass(g.flat(self.media.rho), g.flat(self.media.gamma),
                                     self.omega)).tocsr()

    def full(self) -> sp.csr_matrix:
        if self._full is None:
            self._full = csr(sp.bmat([[self.A, self.G], [self.G.T, -self.C]]))
        return self._full

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[:self.n], x[self.n:]

    def components(self, u: np.ndarray) -> List[np.ndarray]:
        off = self.offsets
        return [u[off[i]:off[i + 1]] for i in range(len(self.blocks))]


def assemble_saddle(media: MediaModel, omega: float, periodic: bool = False) -> SaddleSystem:
    g = media.grid
    _check_omega(omega, media.gamma)
    blocks = []
    masses = []
    rhos = []
    for a in range(g.dim):
        spec = AcousticOperatorSpec(g, media.mu, media.rho, media.gamma, omega, a, periodic)
        blocks.append(assemble_block(spec))
        af = face_average(g, a, periodic)
        rhos.append(np.real(af @ g.flat(media.rho)))
        masses.append(complex_mass(rhos[-1], np.real(af @ g.flat(media.gamma)), omega))
    G = build_gradient(g, periodic)
    C = sp.diags(1.0 / g.flat(media.lam + media.mu)).astype(np.complex128).tocsr()
    return SaddleSystem(g, float(omega), media, blocks, G, C, masses, rhos, periodic)


def build_Ap(media: MediaModel, omega: float, variant: str = "right-weighted",
             periodic: bool = False) -> sp.csr_matrix:
    """Pressure-space shear Helmholtz operator.

    ``right-weighted``: G^T G diag(mu) - omega^2 M_p;
    ``face-averaged``: G^T diag(A_f mu) G - omega^2 M_p.
    """
    g = media.grid
    if variant == "face-averaged":
        return assemble_block(AcousticOperatorSpec(g, media.mu, media.rho, media.gamma, omega,
                                                   "cell", periodic))
    if variant != "right-weighted":
        raise ValueError(f"unknown A_p variant {variant!r}")
    G = build_gradient(g, periodic)
    mp = complex_mass(g.flat(media.rho), g.flat(media.gamma), omega)
    return csr((G.T @ G) @ sp.diags(g.flat(media.mu)) - omega ** 2 * sp.diags(mp))


def pressure_laplacian(saddle: SaddleSystem) -> sp.csr_matrix:
    return csr(saddle.G.T @ saddle.G)


def build_Hp(saddle: SaddleSystem, Ap: sp.csr_matrix) -> sp.csr_matrix:
    """G^T G + A_p C: acoustic operator with P-wave velocity on cells."""
    return csr(saddle.G.T @ saddle.G + Ap @ saddle.C)


@dataclass
class Commutator:
    xi: sp.csr_matrix
    xi_lap: sp.csr_matrix
    xi_mass: sp.csr_matrix


def build_commutator(saddle: SaddleSystem, Ap: sp.csr_matrix,
                     variant: str = "right-weighted") -> Commutator:
    """Xi = G^T A - A_p G^T, together with Xi = Xi_lap - Xi_mass."""
    B = saddle.B
    w2 = saddle.omega ** 2
    xi = csr(B @ saddle.A - Ap @ B)
    M = saddle.M
    Mp = saddle.Mp
    stiff_u = saddle.A + w2 * M
    stiff_p = Ap + w2 * Mp
    xi_lap = csr(B @ stiff_u - stiff_p @ B)
    xi_mass = csr(w2 * (B @ M - Mp @ B))
    return Commutator(xi, xi_lap, xi_mass)


def apply_shift(H, ms, alpha: float, omega: float) -> sp.csr_matrix:
    """H + i alpha omega^2 diag(ms); a shorter ``ms`` is zero-padded.

    Operators here carry attenuation as ``+ i omega gamma rho`` on the
    diagonal, so the shift adds ``alpha * omega`` of artificial attenuation.
    """
    ms = np.asarray(ms, dtype=float)
    if ms.shape[0] > H.shape[0]:
        raise ValueError("shift mass longer than operator")
    if alpha == 0:
        return csr(H)
    pad = np.zeros(H.shape[0])
    pad[:ms.shape[0]] = ms
    return csr(H + 1j * alpha * omega ** 2 * sp.diags(pad))


def hp_shift_mass(saddle: SaddleSystem) -> np.ndarray:
    """Real mass rho/(lambda+mu) of the pressure-velocity block."""
    g = saddle.grid
    return g.flat(saddle.media.rho) * np.real(saddle.C.diagonal())


def shifted_saddle(saddle: SaddleSystem, alpha: float) -> sp.csr_matrix:
    """Full mixed matrix with the complex shift on the leading block only."""
    return apply_shift(saddle.full(), np.concatenate(saddle.face_rho), alpha, saddle.omega)


def point_source(grid: Grid, component: Optional[int] = None,
                 location: Optional[Sequence[int]] = None, n_pressure: Optional[int] = None,
                 periodic: bool = False) -> np.ndarray:
    """Right-hand side with a unit impulse (scaled by 1/cell volume) on one face.

    Defaults to the depth-component face at the top centre of the domain.
    """
    d = grid.dim
    comp = d - 1 if component is None else int(component)
    shapes = [grid.face_shape(a, periodic) for a in range(d)]
    if location is None:
        location = [(grid.cells[a] - 1) // 2 for a in range(d)]
        location[comp] = 0
    location = tuple(int(i) for i in location)
    if any(i < 0 or i >= s for i, s in zip(location, shapes[comp])):
        raise ModelError(f"source location {location} outside face grid {shapes[comp]}")
    counts = [int(np.prod(s)) for s in shapes]
    m = grid.n_cells if n_pressure is None else n_pressure
    rhs = np.zeros(sum(counts) + m, dtype=np.complex128)
    flat = int(np.ravel_multi_index(location, shapes[comp], order="F"))
    rhs[sum(counts[:comp]) + flat] = 1.0 / float(np.prod(grid.spacing))
    return rhs
