"""Complex sparse and small dense linear algebra.

Operators are ``scipy.sparse.csr_matrix`` objects in canonical form (sorted
column indices, no stored zeros, complex128). Mat-vecs go through the
compiled kernel and charge ``nnz`` units to an optional :class:`FlopLedger`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import _kernels
from .flops import FlopLedger


class FactorizationError(RuntimeError):
    pass


class EigenConvergenceError(RuntimeError):
    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


class IllConditionedWarning(RuntimeWarning):
    pass


def csr(a) -> sp.csr_matrix:
    """Canonical complex CSR copy of ``a``."""
    m = sp.csr_matrix(a, dtype=np.complex128, copy=True)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


def spmv(a: sp.csr_matrix, x: np.ndarray, ledger: Optional[FlopLedger] = None,
         category: str = "spmv") -> np.ndarray:
    if a.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {x.shape}")
    y = _kernels.csr_matvec(a.indptr, a.indices, a.data, x)
    if ledger is not None:
        ledger.add(category, a.nnz)
    return y


def kron1d(*ops) -> sp.csr_matrix:
    """Tensor-product operator on an x-fastest grid from per-axis 1D operators."""
    out = sp.csr_matrix(ops[0])
    for op in ops[1:]:
        out = sp.kron(op, out, format="csr")
    return csr(out)


def triple_product(r, a, p) -> sp.csr_matrix:
    if r.shape[1] != a.shape[0] or a.shape[1] != p.shape[0]:
        raise ValueError(f"dimension mismatch: {r.shape} {a.shape} {p.shape}")
    return csr(r @ a @ p)


def bandwidth(a) -> tuple:
    c = a.tocoo()
    if c.nnz == 0:
        return 0, 0
    d = c.row - c.col
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


# ---------------------------------------------------------------------------
# direct solvers

@dataclass
class BandedFactor:
    n: int
    kl: int
    ku: int
    lub: np.ndarray
    piv: np.ndarray
    perm: Optional[np.ndarray]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.lub))

    def solve(self, b: np.ndarray, ledger: Optional[FlopLedger] = None,
              category: str = "coarse") -> np.ndarray:
        return banded_solve(self, b, ledger, category)


def banded_lu(a, band_cap: Optional[int] = None, reorder: bool = True) -> BandedFactor:
    """Band LU with partial pivoting (LAPACK ``zgbtrf``).

    With ``reorder`` a reverse Cuthill-McKee permutation is used when it
    narrows the band.
    """
    a = csr(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("banded_lu needs a square matrix")
    perm = None
    kl, ku = bandwidth(a)
    if reorder and n > 2:
        p = reverse_cuthill_mckee(sp.csr_matrix((a + a.T) != 0), symmetric_mode=True)
        ap = a[p][:, p]
        kl2, ku2 = bandwidth(ap)
        if kl2 + ku2 < kl + ku:
            a, perm, kl, ku = csr(ap), np.asarray(p), kl2, ku2
    if band_cap is not None and max(kl, ku) > band_cap:
        raise FactorizationError(f"bandwidth {max(kl, ku)} exceeds cap {band_cap}")
    c = a.tocoo()
    ab = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128, order="F")
    ab[kl + ku + c.row - c.col, c.col] = c.data
    maxabs = np.abs(c.data).max() if c.nnz else 0.0
    lub, piv, info = lapack.zgbtrf(ab, kl, ku, overwrite_ab=1)
    if info != 0:
        raise FactorizationError(f"zgbtrf failed (info={info}): singular matrix")
    udiag = np.abs(lub[kl + ku])
    if maxabs == 0.0 or udiag.min() < 1e-14 * maxabs:
        raise FactorizationError("numerically singular matrix (pivot below 1e-14 * max|A|)")
    return BandedFactor(n, kl, ku, lub, piv, perm)


def banded_solve(f: BandedFactor, b: np.ndarray, ledger: Optional[FlopLedger] = None,
                 category: str = "coarse") -> np.ndarray:
    b = np.asarray(b, dtype=np.complex128)
    rhs = b if f.perm is None else b[f.perm]
    x, info = lapack.zgbtrs(f.lub, f.kl, f.ku, rhs, f.piv)
    if info != 0:
        raise FactorizationError(f"zgbtrs failed (info={info})")
    if f.perm is not None:
        out = np.empty_like(x)
        out[f.perm] = x
        x = out
    if ledger is not None:
        ledger.add(category, f.nnz)
    return x


@dataclass
class DenseFactor:
    n: int
    lu: np.ndarray
    piv: np.ndarray
    rcond: float

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.lu))

    @property
    def ill_conditioned(self) -> bool:
        return self.rcond < 1e3 * np.finfo(float).eps

    def solve(self, b, ledger: Optional[FlopLedger] = None, category: str = "coarse"):
        return dense_solve(self, b, ledger, category)


def dense_lu(a) -> DenseFactor:
    a = np.array(a.toarray() if sp.issparse(a) else a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("dense_lu needs a square matrix")
    anorm = np.abs(a).sum(axis=0).max() if a.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    d = np.abs(np.diag(lu))
    if anorm == 0.0 or d.min() == 0.0:
        raise FactorizationError("singular matrix")
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    f = DenseFactor(a.shape[0], lu, piv, float(rcond))
    if f.ill_conditioned:
        warnings.warn(f"ill-conditioned matrix (rcond={rcond:.2e}); solution may be inaccurate",
                      IllConditionedWarning, stacklevel=2)
    return f


def dense_solve(f: DenseFactor, b, ledger: Optional[FlopLedger] = None, category: str = "coarse"):
    x = sla.lu_solve((f.lu, f.piv), np.asarray(b, dtype=np.complex128))
    if ledger is not None:
        ledger.add(category, f.nnz)
    return x


def factorize(a, band_cap: int = 2000, dense_cap: int = 5000):
    """Banded LU when the (reordered) band fits ``band_cap``, else dense LU."""
    try:
        return banded_lu(a, band_cap=band_cap)
    except FactorizationError as exc:
        if "exceeds cap" not in str(exc):
            raise
    if a.shape[0] > dense_cap:
        raise FactorizationError(
            f"system of size {a.shape[0]} too wide for banded LU and too large for dense LU")
    return dense_lu(a)


# ---------------------------------------------------------------------------
# eigenvalues

def dense_eig(a, cap: int = 4000, max_sweeps: Optional[int] = None) -> np.ndarray:
    """All eigenvalues via Householder-Hessenberg reduction and shifted QR."""
    a = np.asarray(a.toarray() if sp.issparse(a) else a, dtype=np.complex128)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("dense_eig needs a square matrix")
    if n > cap:
        raise ValueError(f"matrix of size {n} exceeds eigensolver cap {cap}")
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    h = _kernels.hessenberg(a)
    eigs, found, _ = _kernels.qr_eigvals(h, 50 * n if max_sweeps is None else max_sweeps)
    if found < n:
        raise EigenConvergenceError(
            f"QR iteration did not converge ({found}/{n} eigenvalues)", eigs[n - found:])
    return eigs


class PowerResult(NamedTuple):
    rho: float
    iterations: int
    converged: bool


def power_method(op: Callable[[np.ndarray], np.ndarray], n: int, tol: float = 1e-4,
                 max_iter: int = 500, seed: int = 0) -> PowerResult:
    """Estimate the spectral radius of a linear map from mat-vecs only."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iter + 1):
        w = op(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return PowerResult(0.0, it, True)
        if it > 1 and abs(nw - est) < tol * nw:
            return PowerResult(float(nw), it, True)
        est = nw
        v = w / nw
    return PowerResult(float(est), max_iter, False)
