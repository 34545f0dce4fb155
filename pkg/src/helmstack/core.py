"""Grids, media models and physical-parameter conversions.

Cell fields are stored as arrays of shape ``grid.cells`` and flattened in
Fortran order (x fastest). The last axis is depth; index 0 on it is the top.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np


class ModelError(ValueError):
    """Invalid grid, medium or physical parameter."""


@dataclass(frozen=True)
class Grid:
    cells: Tuple[int, ...]
    spacing: Tuple[float, ...]

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        spacing = tuple(float(h) for h in self.spacing)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "spacing", spacing)
        if len(cells) not in (2, 3) or len(spacing) != len(cells):
            raise ModelError(f"grid must be 2D or 3D, got cells={cells} spacing={spacing}")
        if any(c < 1 for c in cells):
            raise ModelError(f"cell counts must be positive: {cells}")
        if any(not h > 0 for h in spacing):
            raise ModelError(f"spacings must be positive: {spacing}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    def face_shape(self, axis: int, periodic: bool = False) -> Tuple[int, ...]:
        shape = list(self.cells)
        if not periodic:
            shape[axis] += 1
        return tuple(shape)

    def face_counts(self, periodic: bool = False) -> Tuple[int, ...]:
        return tuple(int(np.prod(self.face_shape(a, periodic))) for a in range(self.dim))

    @property
    def n_faces(self) -> int:
        return sum(self.face_counts())

    def check_levels(self, levels: int) -> None:
        """Raise unless every axis survives ``levels - 1`` halvings."""
        if levels < 1:
            raise ModelError("levels must be >= 1")
        f = 2 ** (levels - 1)
        if any(c % f for c in self.cells) or any(c // f < 2 for c in self.cells):
            raise ModelError(
                f"grid {self.cells} is not coarsenable to {levels} levels "
                f"(every axis must be divisible by {f})")

    def coarsen(self) -> "Grid":
        if any(c % 2 for c in self.cells):
            raise ModelError(f"grid {self.cells} has an odd axis")
        return Grid(tuple(c // 2 for c in self.cells), tuple(2 * h for h in self.spacing))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(tuple(c * factor for c in self.cells), tuple(h / factor for h in self.spacing))

    def flat(self, arr: np.ndarray) -> np.ndarray:
        return np.asarray(arr).reshape(-1, order="F")

    def unflat(self, vec: np.ndarray, shape: Optional[Sequence[int]] = None) -> np.ndarray:
        return np.asarray(vec).reshape(tuple(shape or self.cells), order="F")


def grid_for_domain(cells: Sequence[int], extent: Sequence[float]) -> Grid:
    return Grid(tuple(cells), tuple(L / n for L, n in zip(extent, cells)))


@dataclass(frozen=True)
class MediaModel:
    grid: Grid
    rho: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        shape = self.grid.cells
        for key in ("rho", "lam", "mu", "gamma"):
            arr = np.array(getattr(self, key), dtype=float)
            if arr.ndim == 0:
                arr = np.full(shape, float(arr))
            if arr.shape != shape:
                raise ModelError(f"{key} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        if not np.all(self.rho > 0):
            raise ModelError("density must be positive")
        if not np.all(self.mu >= 0):
            raise ModelError("mu must be non-negative")
        if not np.all(self.lam + self.mu > 0):
            raise ModelError("lambda + mu must be positive")
        if not np.all(self.gamma >= 0):
            raise ModelError("attenuation must be non-negative")

    @property
    def sigma(self) -> np.ndarray:
        return poisson_ratio(self.lam, self.mu)

    @property
    def velocities(self) -> Tuple[np.ndarray, np.ndarray]:
        return wave_velocities(self.rho, self.lam, self.mu)

    def with_(self, **kw) -> "MediaModel":
        return replace(self, **kw)


@dataclass(frozen=True)
class FrequencySpec:
    omega: float
    alpha: float = 0.0
    gs_target: float = 10.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ModelError("omega must be positive")
        if self.alpha < 0:
            raise ModelError("alpha must be non-negative")


def poisson_ratio(lam, mu):
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    s = lam + mu
    if np.any(s <= 0):
        raise ModelError("Poisson ratio undefined for lambda + mu <= 0")
    out = lam / (2.0 * s)
    return float(out) if out.ndim == 0 else out


def wave_velocities(rho, lam, mu):
    rho = np.asarray(rho, dtype=float)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    vp = np.sqrt((lam + 2 * mu) / rho)
    vs = np.sqrt(mu / rho)
    if vp.ndim == 0:
        return float(vp), float(vs)
    return vp, vs


def lame_from_velocities(rho, vp, vs):
    """Return ``(lam, mu)`` from density and wave speeds."""
    rho = np.asarray(rho, dtype=float)
    vp = np.asarray(vp, dtype=float)
    vs = np.asarray(vs, dtype=float)
    mu = rho * vs ** 2
    lam = rho * vp ** 2 - 2 * mu
    return lam, mu


def default_rho_rule(vp):
    return 0.25 * vp + 1.2


def default_vs_rule(vp):
    return 0.5 * vp


def elastic_from_acoustic(vp, grid: Optional[Grid] = None, rho_rule=default_rho_rule,
                          vs_rule=default_vs_rule, gamma=0.0) -> MediaModel:
    """Elastic medium from a P-velocity field via empirical density/shear rules."""
    vp = np.asarray(vp, dtype=float)
    if np.any(~(vp > 0)):
        raise ModelError("P-wave velocity must be positive")
    if grid is None:
        grid = Grid(vp.shape, (1.0,) * vp.ndim)
    vp = np.broadcast_to(vp, grid.cells)
    rho = rho_rule(vp)
    vs = vs_rule(vp)
    lam, mu = lame_from_velocities(rho, vp, vs)
    if np.any(lam + mu <= 0):
        raise ModelError("conversion produced lambda + mu <= 0")
    return MediaModel(grid, rho, lam, mu, gamma, name="converted")


HOMOGENEOUS_EXTENT_2D = (16.0, 5.0)
HOMOGENEOUS_EXTENT_3D = (16.0, 16.0, 8.0)
NATURAL_GAMMA = 0.01 * math.pi


def builtin_media(name: str, grid: Grid, lambda_factor: float = 1.0,
                  gamma0: float = NATURAL_GAMMA) -> MediaModel:
    """``homogeneous`` or ``linear`` model on ``grid``, without the ABC layer.

    The linear model grows from top to bottom: rho 2..3, mu 1..15, lambda 4..20
    (lambda then scaled by ``lambda_factor``).
    """
    shape = grid.cells
    if name == "homogeneous":
        return MediaModel(grid, np.ones(shape), np.full(shape, 16.0 * lambda_factor),
                          np.ones(shape), np.full(shape, gamma0), name="homogeneous")
    if name == "linear":
        nz = shape[-1]
        t = np.linspace(0.0, 1.0, nz) if nz > 1 else np.zeros(1)
        t = np.broadcast_to(t.reshape((1,) * (grid.dim - 1) + (nz,)), shape)
        return MediaModel(grid, 2.0 + t, (4.0 + 16.0 * t) * lambda_factor, 1.0 + 14.0 * t,
                          np.full(shape, gamma0), name="linear")
    raise ModelError(f"unknown builtin media {name!r}")


def builtin_grid(name: str, cells: Sequence[int]) -> Grid:
    """Grid over the default physical extent of a builtin model."""
    cells = tuple(cells)
    extent = HOMOGENEOUS_EXTENT_2D if len(cells) == 2 else HOMOGENEOUS_EXTENT_3D
    return grid_for_domain(cells, extent)


def select_omega(media: MediaModel, gs_target: float = 10.0, report: Optional[dict] = None) -> float:
    """Angular frequency giving ``gs_target`` points per slowest shear wavelength."""
    if not gs_target > 0:
        raise ModelError("gs_target must be positive")
    vp, vs = media.velocities
    v = float(np.min(vs))
    if v <= 0:
        v = float(np.min(vp))
        if report is not None:
            report["omega_from"] = "vp"
    elif report is not None:
        report["omega_from"] = "vs"
    return 2 * math.pi * v / (gs_target * max(media.grid.spacing))


def default_abc_width(cells: Sequence[int], width: int = 20) -> int:
    m = min(cells)
    if width < m / 2:
        return width
    return max(1, m // 4)


def abc_profile(grid: Grid, layer_width: int, gamma_max: float,
                sides: Optional[Sequence[Tuple[int, int]]] = None) -> np.ndarray:
    """Quadratic sponge ramp, 1 on the outermost cells, 0 at depth >= width."""
    if sides is None:
        sides = [(a, s) for a in range(grid.dim) for s in (0, 1)]
    sides = [tuple(s) for s in sides]
    w = int(layer_width)
    if w < 0:
        raise ModelError("layer width must be non-negative")
    for a in range(grid.dim):
        if (a, 0) in sides and (a, 1) in sides and 2 * w > grid.cells[a]:
            raise ModelError(f"absorbing layers of width {w} overlap along axis {a}")
        if w > grid.cells[a]:
            raise ModelError(f"absorbing layer width {w} exceeds axis {a}")
    ramp = np.zeros(grid.cells)
    if w == 0:
        return ramp
    for a, s in sides:
        n = grid.cells[a]
        idx = np.arange(n)
        d = idx if s == 0 else n - 1 - idx
        r = np.where(d < w, ((w - d) / w) ** 2, 0.0)
        shape = [1] * grid.dim
        shape[a] = n
        ramp = np.maximum(ramp, r.reshape(shape))
    return ramp


def apply_abc(media: MediaModel, layer_width: int = 20, gamma0: float = NATURAL_GAMMA,
              gamma_max: float = 2 * math.pi,
              sides: Optional[Sequence[Tuple[int, int]]] = None) -> MediaModel:
    """Replace the attenuation field by ``gamma0`` plus a boundary sponge."""
    ramp = abc_profile(media.grid, layer_width, gamma_max, sides)
    return media.with_(gamma=gamma0 + gamma_max * ramp)


MARMOUSI_LIKE_EXTENT = (17.0, 3.5)


def synthetic_layered(cells: Sequence[int] = (544, 112), extent=MARMOUSI_LIKE_EXTENT,
                      gamma0: float = NATURAL_GAMMA) -> MediaModel:
    """Deterministic dipping-layer P-velocity model converted to elastic.

    A stand-in for a shallow marine section (P velocity 1.5..4.5 km/s with
    dipping interfaces and one vertical throw); density and shear velocity
    follow :func:`elastic_from_acoustic`'s default rules.
    """
    grid = grid_for_domain(cells, extent)
    nx, nz = grid.cells
    x = (np.arange(nx) + 0.5) / nx
    z = (np.arange(nz) + 0.5) / nz
    X, Z = np.meshgrid(x, z, indexing="ij")
    depth = Z - 0.25 * (X - 0.5) + 0.05 * np.sin(6 * np.pi * X)
    depth = np.where(X > 0.62, depth - 0.08, depth)
    layer = np.floor(np.clip(depth, 0.0, 0.999) * 9)
    vp = 1.5 + 3.0 * (layer / 8.0) ** 0.8 + 0.1 * np.cos(3 * np.pi * X) * (layer > 0)
    m = elastic_from_acoustic(vp, grid, gamma=gamma0)
    return m.with_(name="layered")


def extend_bottom(media: MediaModel, rows: int = 16) -> MediaModel:
    """Replicate the deepest cell layer ``rows`` times."""
    g = media.grid
    cells = g.cells[:-1] + (g.cells[-1] + rows,)
    grid = Grid(cells, g.spacing)

    def ext(a):
        last = a[..., -1:]
        return np.concatenate([a, np.repeat(last, rows, axis=-1)], axis=-1)

    return MediaModel(grid, ext(media.rho), ext(media.lam), ext(media.mu), ext(media.gamma),
                      name=media.name)


def slice_media(media: MediaModel, size: Sequence[int], origin: Optional[Sequence[int]] = None,
                **abc_kw) -> MediaModel:
    """Sub-model anchored at ``origin`` (top-left by default) with a fresh ABC."""
    size = tuple(int(s) for s in size)
    origin = tuple(origin) if origin is not None else (0,) * media.grid.dim
    if len(size) != media.grid.dim or any(
            o < 0 or o + s > c for o, s, c in zip(origin, size, media.grid.cells)):
        raise ModelError(f"slice {size} at {origin} exceeds grid {media.grid.cells}")
    sl = tuple(slice(o, o + s) for o, s in zip(origin, size))
    grid = Grid(size, media.grid.spacing)
    sub = MediaModel(grid, media.rho[sl], media.lam[sl], media.mu[sl], media.gamma[sl],
                     name=media.name)
    abc_kw.setdefault("layer_width", default_abc_width(size))
    return apply_abc(sub, **abc_kw)
