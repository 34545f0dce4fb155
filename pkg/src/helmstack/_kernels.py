"""Hot inner loops, compiled with numba when available.

Set ``HELMSTACK_NUMBA=0`` to force the vectorized numpy path; both paths
compute the same quantities and are cross-checked in the test suite.
"""
from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    return os.environ.get("HELMSTACK_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


try:
    import numba as nb
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()

_NB_OPTS = dict(nogil=True, cache=True)


# ---------------------------------------------------------------------------
# numpy reference implementations

def _csr_matvec_np(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    prod = data * x[indices]
    out = np.zeros(n, dtype=np.result_type(data, x))
    rows = np.repeat(np.arange(n), np.diff(indptr))
    np.add.at(out, rows, prod)
    return out


def _jacobi_np(indptr, indices, data, inv_diag, x, b, damping):
    r = b - _csr_matvec_np(indptr, indices, data, x)
    x += damping * inv_diag * r
    return x


def _vanka_np(x, r, dofs, inv_blocks, cells, damping):
    d = dofs[cells]
    upd = np.einsum("cab,cb->ca", inv_blocks[cells], r[d])
    # cells of one colour own disjoint unknowns
    x[d] += damping * upd
    return x


def _hessenberg_np(a):
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        v = x
        v[0] = x0 + phase * nx
        v /= np.linalg.norm(v)
        a[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ a[k + 1:, k:])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v.conj())
        a[k + 2:, k] = 0.0
    return a


def _wilkinson(h, hi, its):
    a, b = h[hi - 1, hi - 1], h[hi - 1, hi]
    c, d = h[hi, hi - 1], h[hi, hi]
    if its > 0 and its % 10 == 0:
        return d + 0.75 * abs(c) * (1.0 + 1.0j) * (1 + its // 10)
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    m1 = 0.5 * (a + d) + disc
    m2 = 0.5 * (a + d) - disc
    return m1 if abs(m1 - d) <= abs(m2 - d) else m2


def _qr_eigvals_np(h, max_sweeps):
    n = h.shape[0]
    eigs = np.zeros(n, dtype=np.complex128)
    eps = np.finfo(float).eps
    hnorm = np.abs(h).max() if n else 0.0
    if hnorm == 0.0:
        return eigs, n, 0
    hi, its, sweeps, found = n - 1, 0, 0, 0
    rot = []
    while hi >= 0:
        if hi == 0:
            eigs[0] = h[0, 0]
            found += 1
            break
        sub = np.abs(np.diagonal(h, -1)[:hi])
        diag = np.abs(np.diagonal(h)[:hi + 1])
        scale = diag[1:] + diag[:-1]
        scale[scale == 0] = hnorm
        small = np.nonzero(sub <= eps * scale)[0]
        lo = int(small[-1]) + 1 if small.size else 0
        if lo > 0:
            h[lo, lo - 1] = 0.0
        if lo == hi:
            eigs[hi] = h[hi, hi]
            found += 1
            hi -= 1
            its = 0
            continue
        if sweeps >= max_sweeps:
            break
        shift = _wilkinson(h, hi, its)
        idx = np.arange(lo, hi + 1)
        h[idx, idx] -= shift
        rot.clear()
        for k in range(lo, hi):
            x, y = h[k, k], h[k + 1, k]
            ax = abs(x)
            nu = np.hypot(ax, abs(y))
            if nu == 0.0:
                c_, s_ = 1.0, 0.0j
            elif ax == 0.0:
                c_, s_ = 0.0, 1.0 + 0.0j
            else:
                c_, s_ = ax / nu, (x / ax) * np.conj(y) / nu
            rot.append((c_, s_))
            t1 = h[k, k:hi + 1].copy()
            t2 = h[k + 1, k:hi + 1]
            h[k, k:hi + 1] = c_ * t1 + s_ * t2
            h[k + 1, k:hi + 1] = -np.conj(s_) * t1 + c_ * t2
        for k, (c_, s_) in zip(range(lo, hi), rot):
            top = min(k + 2, hi) + 1
            t1 = h[lo:top, k].copy()
            t2 = h[lo:top, k + 1]
            h[lo:top, k] = c_ * t1 + np.conj(s_) * t2
            h[lo:top, k + 1] = -s_ * t1 + c_ * t2
        h[idx, idx] += shift
        its += 1
        sweeps += 1
    return eigs, found, sweeps


def _qr_eigvals_impl(h, max_sweeps):
    """Single-shift complex QR on an upper Hessenberg matrix (destroys ``h``).

    Returns ``(eigs, n_found, sweeps)``; ``eigs[hi+1:]`` hold the deflated
    eigenvalues when ``n_found < n``.
    """
    n = h.shape[0]
    eigs = np.zeros(n, dtype=np.complex128)
    eps = 2.220446049250313e-16
    hnorm = 0.0
    for i in range(n):
        for j in range(n):
            hnorm = max(hnorm, abs(h[i, j]))
    if hnorm == 0.0:
        return eigs, n, 0
    cs = np.zeros(n, dtype=np.float64)
    sn = np.zeros(n, dtype=np.complex128)
    hi = n - 1
    its = 0
    sweeps = 0
    found = 0
    while hi >= 0:
        if hi == 0:
            eigs[0] = h[0, 0]
            found += 1
            break
        lo = hi
        while lo > 0:
            s = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if s == 0.0:
                s = hnorm
            if abs(h[lo, lo - 1]) <= eps * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs[hi] = h[hi, hi]
            found += 1
            hi -= 1
            its = 0
            continue
        if sweeps >= max_sweeps:
            break
        a = h[hi - 1, hi - 1]
        b = h[hi - 1, hi]
        c = h[hi, hi - 1]
        d = h[hi, hi]
        if its > 0 and its % 10 == 0:
            shift = d + 0.75 * abs(c) * (1.0 + 1.0j) * (1 + its // 10)
        else:
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            m1 = 0.5 * (a + d) + disc
            m2 = 0.5 * (a + d) - disc
            shift = m1 if abs(m1 - d) <= abs(m2 - d) else m2
        for k in range(lo, hi + 1):
            h[k, k] -= shift
        for k in range(lo, hi):
            x = h[k, k]
            y = h[k + 1, k]
            ax = abs(x)
            nu = np.sqrt(ax * ax + abs(y) ** 2)
            if nu == 0.0:
                cs[k] = 1.0
                sn[k] = 0.0
                continue
            if ax == 0.0:
                c_ = 0.0
                s_ = 1.0 + 0.0j
            else:
                ph = x / ax
                c_ = ax / nu
                s_ = ph * np.conj(y) / nu
            cs[k] = c_
            sn[k] = s_
            for j in range(k, hi + 1):
                t1 = h[k, j]
                t2 = h[k + 1, j]
                h[k, j] = c_ * t1 + s_ * t2
                h[k + 1, j] = -np.conj(s_) * t1 + c_ * t2
        for k in range(lo, hi):
            c_ = cs[k]
            s_ = sn[k]
            top = min(k + 2, hi)
            for i in range(lo, top + 1):
                t1 = h[i, k]
                t2 = h[i, k + 1]
                h[i, k] = c_ * t1 + np.conj(s_) * t2
                h[i, k + 1] = -s_ * t1 + c_ * t2
        for k in range(lo, hi + 1):
            h[k, k] += shift
        its += 1
        sweeps += 1
    return eigs, found, sweeps


# ---------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @nb.njit(**_NB_OPTS)
    def _csr_matvec_nb(indptr, indices, data, x):
        n = indptr.shape[0] - 1
        out = np.zeros(n, dtype=np.complex128)
        for i in range(n):
            acc = 0.0j
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * x[indices[p]]
            out[i] = acc
        return out

    @nb.njit(**_NB_OPTS)
    def _jacobi_nb(indptr, indices, data, inv_diag, x, b, damping):
        n = indptr.shape[0] - 1
        r = np.empty(n, dtype=np.complex128)
        for i in range(n):
            acc = b[i]
            for p in range(indptr[i], indptr[i + 1]):
                acc -= data[p] * x[indices[p]]
            r[i] = acc
        for i in range(n):
            x[i] += damping * inv_diag[i] * r[i]
        return x

    @nb.njit(**_NB_OPTS)
    def _vanka_nb(x, r, dofs, inv_blocks, cells, damping):
        k = dofs.shape[1]
        for q in range(cells.shape[0]):
            c = cells[q]
            for a in range(k):
                acc = 0.0j
                for b in range(k):
                    acc += inv_blocks[c, a, b] * r[dofs[c, b]]
                x[dofs[c, a]] += damping * acc
        return x

    @nb.njit(**_NB_OPTS)
    def _hessenberg_nb(a):
        n = a.shape[0]
        v = np.empty(n, dtype=np.complex128)
        w = np.empty(n, dtype=np.complex128)
        for k in range(n - 2):
            m = n - k - 1
            nx = 0.0
            for i in range(m):
                v[i] = a[k + 1 + i, k]
                nx += v[i].real ** 2 + v[i].imag ** 2
            nx = np.sqrt(nx)
            if nx == 0.0:
                continue
            x0 = v[0]
            phase = x0 / abs(x0) if x0 != 0 else 1.0 + 0.0j
            v[0] = x0 + phase * nx
            nv = 0.0
            for i in range(m):
                nv += v[i].real ** 2 + v[i].imag ** 2
            nv = np.sqrt(nv)
            for i in range(m):
                v[i] /= nv
            # left: a[k+1:, k:] -= 2 v (v^H a[k+1:, k:])
            for j in range(k, n):
                acc = 0.0j
                for i in range(m):
                    acc += np.conj(v[i]) * a[k + 1 + i, j]
                acc *= 2.0
                for i in range(m):
                    a[k + 1 + i, j] -= v[i] * acc
            # right: a[:, k+1:] -= 2 (a[:, k+1:] v) v^H
            for i in range(n):
                acc = 0.0j
                for j in range(m):
                    acc += a[i, k + 1 + j] * v[j]
                w[i] = 2.0 * acc
            for j in range(m):
                cv = np.conj(v[j])
                for i in range(n):
                    a[i, k + 1 + j] -= w[i] * cv
            for i in range(k + 2, n):
                a[i, k] = 0.0
        return a

    _qr_eigvals_nb = nb.njit(**_NB_OPTS)(_qr_eigvals_impl)


# ---------------------------------------------------------------------------
# dispatch

def _c(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def csr_matvec(indptr, indices, data, x, use_numba=None):
    if USE_NUMBA if use_numba is None else use_numba:
        return _csr_matvec_nb(indptr, indices, _c(data), _c(x))
    return _csr_matvec_np(indptr, indices, data, x)


def jacobi_sweep(indptr, indices, data, inv_diag, x, b, damping, use_numba=None):
    """In-place damped Jacobi step on ``x``."""
    if USE_NUMBA if use_numba is None else use_numba:
        return _jacobi_nb(indptr, indices, _c(data), _c(inv_diag), x, _c(b), float(damping))
    return _jacobi_np(indptr, indices, data, inv_diag, x, b, damping)


def vanka_update(x, r, dofs, inv_blocks, cells, damping, use_numba=None):
    """In-place additive local correction for one colour class."""
    if USE_NUMBA if use_numba is None else use_numba:
        return _vanka_nb(x, _c(r), dofs, inv_blocks, cells, float(damping))
    return _vanka_np(x, r, dofs, inv_blocks, cells, damping)


def hessenberg(a, use_numba=None):
    """Householder reduction to upper Hessenberg form (in place on a copy)."""
    h = np.array(a, dtype=np.complex128, order="C")
    if USE_NUMBA if use_numba is None else use_numba:
        return _hessenberg_nb(h)
    return _hessenberg_np(h)


def qr_eigvals(h, max_sweeps, use_numba=None):
    h = np.array(h, dtype=np.complex128, order="C")
    if USE_NUMBA if use_numba is None else use_numba:
        return _qr_eigvals_nb(h, int(max_sweeps))
    return _qr_eigvals_np(h, int(max_sweeps))
