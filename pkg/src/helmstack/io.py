"""File formats: EHGRID media files, raw complex field dumps, PPM heatmaps, CSV."""
from __future__ import annotations

import csv
import os
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import Grid, MediaModel, ModelError, NATURAL_GAMMA, lame_from_velocities

MAGIC = "EHGRID"


class FormatError(ModelError):
    pass


def write_ehgrid(path, grid: Grid, rho, vp, vs) -> None:
    """Header line, then rho, vp, vs as little-endian float64, x-fastest."""
    dims = " ".join(str(c) for c in grid.cells)
    hs = " ".join(repr(float(h)) for h in grid.spacing)
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {grid.dim} {dims} {hs}\n".encode("ascii"))
        for a in (rho, vp, vs):
            a = np.broadcast_to(np.asarray(a, dtype=float), grid.cells)
            fh.write(np.asarray(a).ravel(order="F").astype("<f8").tobytes())


def read_ehgrid(path) -> Tuple[Grid, np.ndarray, np.ndarray, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read media file {path}: {exc.strerror}") from None
    try:
        tok = header.decode("ascii").split()
    except UnicodeDecodeError:
        raise FormatError("malformed EHGRID header") from None
    if not tok or tok[0] != MAGIC:
        raise FormatError("missing EHGRID magic")
    try:
        dim = int(tok[1])
        if dim not in (2, 3) or len(tok) != 2 + 2 * dim:
            raise ValueError
        cells = tuple(int(t) for t in tok[2:2 + dim])
        spacing = tuple(float(t) for t in tok[2 + dim:])
    except (ValueError, IndexError):
        raise FormatError("malformed EHGRID header") from None
    try:
        grid = Grid(cells, spacing)
    except ModelError as exc:
        raise FormatError(f"malformed EHGRID header: {exc}") from None
    n = grid.n_cells
    if len(payload) != 3 * 8 * n:
        raise FormatError(f"expected {3 * 8 * n} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    rho, vp, vs = (data[i * n:(i + 1) * n].reshape(cells, order="F") for i in range(3))
    if not (np.all(np.isfinite(data))):
        raise FormatError("non-finite values in media file")
    return grid, rho, vp, vs


def media_from_ehgrid(path, gamma: float = NATURAL_GAMMA, name: Optional[str] = None) -> MediaModel:
    grid, rho, vp, vs = read_ehgrid(path)
    lam, mu = lame_from_velocities(rho, vp, vs)
    return MediaModel(grid, rho, lam, mu, gamma,
                      name=name or os.path.splitext(os.path.basename(str(path)))[0])


def write_field(path, values, shape: Sequence[int]) -> None:
    """Complex field on a grid of ``shape`` as interleaved re/im little-endian float64."""
    v = np.asarray(values, dtype=np.complex128).reshape(tuple(shape), order="F").ravel(order="F")
    out = np.empty(2 * v.size, dtype="<f8")
    out[0::2] = v.real
    out[1::2] = v.imag
    with open(path, "wb") as fh:
        fh.write(out.tobytes())


def read_field(path, shape: Sequence[int]) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != 2 * int(np.prod(shape)):
        raise FormatError(f"field file {path} does not match shape {tuple(shape)}")
    return (raw[0::2] + 1j * raw[1::2]).reshape(tuple(shape), order="F")


def to_gray(mag: np.ndarray, log: bool = False, floor: float = 1e-6) -> np.ndarray:
    """Map non-negative magnitudes to 0..255 (linear, or log10 over ``floor`` dynamic range)."""
    mag = np.abs(np.asarray(mag, dtype=float))
    top = mag.max() if mag.size else 0.0
    if top == 0.0:
        return np.zeros(mag.shape, dtype=np.uint8)
    if log:
        lo = np.log10(floor)
        t = (np.log10(np.maximum(mag / top, floor)) - lo) / -lo
    else:
        t = mag / top
    return np.clip(np.rint(255.0 * t), 0, 255).astype(np.uint8)


def write_ppm(path, mag2d: np.ndarray, log: bool = False) -> None:
    """Binary P6 grayscale image; array axis 0 is the image width, axis 1 the rows (depth)."""
    g = to_gray(mag2d, log)
    if g.ndim != 2:
        raise ValueError("PPM output needs a 2D array")
    w, h = g.shape
    rgb = np.repeat(g.T[:, :, None], 3, axis=2)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    """Gray values of a P6 file written by :func:`write_ppm`, shape (width, height)."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise FormatError("not a P6 file")
    w, h = map(int, parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
    return img[:, :, 0].T.copy()


def write_csv_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for r in rows:
            w.writerow([r.get(k, "") for k in header] if isinstance(r, dict) else list(r))
