"""Right-preconditioned (F)GMRES for complex sparse systems.

The iteration count is the total number of preconditioner applications.
Plain GMRES spends one application per Arnoldi step plus one per restart
cycle to map the Krylov update back (``extra_applications``); the flexible
variant stores the preconditioned vectors and needs no extra application.
The residual history holds the Givens estimate after each Arnoldi step and
the true residual after each update, so it has ``iterations + 1`` entries.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .flops import FlopLedger
from .sparse import spmv

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass
class KrylovConfig:
    method: str = "gmres"       # gmres | fgmres
    restart: int = 0            # 0: no restart
    tol: float = 1e-6
    max_total_iters: int = 2000
    seed: int = 0               # unused: the initial guess is always zero

    def __post_init__(self):
        if self.method not in ("gmres", "fgmres"):
            raise ValueError(f"unknown Krylov method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.restart < 0 or self.max_total_iters < 1:
            raise ValueError("restart must be >= 0 and max_total_iters >= 1")


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    residual_history: List[float]
    flops: Dict[str, float]
    wall_time: float
    true_relres: float
    arnoldi_steps: int = 0
    extra_applications: int = 0
    breakdown: bool = False

    def as_dict(self):
        return dict(converged=self.converged, iterations=self.iterations,
                    residual_history=list(map(float, self.residual_history)),
                    flops=dict(self.flops), wall_time=self.wall_time,
                    true_relres=self.true_relres, arnoldi_steps=self.arnoldi_steps,
                    extra_applications=self.extra_applications,
                    breakdown=self.breakdown)


def _as_operator(K, ledger: Optional[FlopLedger]) -> Operator:
    if callable(K) and not hasattr(K, "indptr"):
        return K
    return lambda v: spmv(K, v, ledger, "krylov")


def arnoldi_step(V, H, j, w):
    """Orthogonalise ``w`` against ``V[0..j]`` by modified Gram-Schmidt.

    A second pass runs when the first one cancels more than 30% of the norm.
    """
    before = np.linalg.norm(w)
    for sweep in range(2):
        for i in range(j + 1):
            h = np.vdot(V[i], w)
            H[i, j] += h
            w -= h * V[i]
        after = np.linalg.norm(w)
        if after > 0.7 * before:
            break
        before = after
    H[j + 1, j] = after
    return w


def _grow(a, rows, cols):
    out = np.zeros((rows, cols), dtype=a.dtype)
    out[:a.shape[0], :a.shape[1]] = a
    return out


def _givens(a, b):
    if b == 0:
        return 1.0, 0.0j
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    t = np.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t
    return c, s


def gmres_solve(K, b, M: Optional[Operator] = None, config: Optional[KrylovConfig] = None,
                x0=None, ledger: Optional[FlopLedger] = None, record_basis: bool = False):
    """Solve ``K x = b`` with GMRES on ``K M^-1``; returns ``(x, report)``.

    ``K`` is a sparse matrix or a callable, ``M`` the preconditioner callable.
    ``config.method`` selects plain or flexible storage. With ``record_basis``
    the last Arnoldi basis is attached as ``report.basis``.
    """
    cfg = config or KrylovConfig()
    flexible = cfg.method == "fgmres"
    max_iter = cfg.max_total_iters
    ledger = ledger if ledger is not None else FlopLedger()
    t0 = time.perf_counter()
    matvec = _as_operator(K, ledger)
    prec = M if M is not None else (lambda v: v)
    b = np.asarray(b, dtype=np.complex128)
    N = b.shape[0]
    x = np.zeros(N, dtype=np.complex128) if x0 is None else np.array(x0, dtype=np.complex128)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        rep = SolverReport(True, 0, [0.0], ledger.snapshot(), time.perf_counter() - t0, 0.0)
        return np.zeros(N, dtype=np.complex128), rep
    m = cfg.restart if cfg.restart > 0 else max_iter
    r = b - matvec(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta / bnorm]
    its = 0
    extra = 0
    converged = beta / bnorm <= cfg.tol
    breakdown = False
    basis = None
    while not converged:
        steps = min(m, max_iter - its - extra - (0 if flexible else 1))
        if steps < 1:
            break
        V = [r / beta]
        Z = [] if flexible else None
        cap = min(steps, 64)
        H = np.zeros((cap + 1, cap), dtype=np.complex128)
        cs = np.zeros(cap)
        sn = np.zeros(cap, dtype=np.complex128)
        g = np.zeros(cap + 1, dtype=np.complex128)
        g[0] = beta
        k = 0
        for j in range(steps):
            if j == cap:
                cap = min(steps, 2 * cap)
                H = _grow(H, cap + 1, cap)
                cs = _grow(cs[None, :], 1, cap)[0]
                sn = _grow(sn[None, :], 1, cap)[0]
                g = _grow(g[None, :], 1, cap + 1)[0]
            z = prec(V[j])
            if Z is not None:
                Z.append(z)
            w = arnoldi_step(V, H, j, matvec(z))
            its += 1
            k = j + 1
            hn = H[j + 1, j].real
            if hn > 1e-14 * np.abs(H[:j + 2, j]).max():
                V.append(w / hn)
            else:
                breakdown = True
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            history.append(abs(g[j + 1]) / bnorm)
            if history[-1] <= cfg.tol or breakdown:
                break
        y = solve_triangular(H[:k, :k], g[:k])
        if Z is not None:
            x += np.column_stack(Z) @ y
        else:
            x += prec(np.column_stack(V[:k]) @ y)
            if M is not None:
                extra += 1
        if record_basis:
            basis = np.column_stack(V)
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        converged = beta / bnorm <= cfg.tol
        if Z is None and M is not None:
            history.append(beta / bnorm)
        else:
            history[-1] = beta / bnorm
        if breakdown:
            break
    rep = SolverReport(bool(converged), its + extra, history, ledger.snapshot(),
                       time.perf_counter() - t0, float(beta / bnorm), its, extra, breakdown)
    if record_basis:
        rep.basis = basis
    return x, rep


def fgmres_solve(K, b, M: Optional[Operator] = None, config: Optional[KrylovConfig] = None,
                 x0=None, ledger: Optional[FlopLedger] = None, record_basis: bool = False):
    cfg = replace(config or KrylovConfig(), method="fgmres")
    return gmres_solve(K, b, M, cfg, x0, ledger, record_basis)


def krylov_solve(K, b, M: Optional[Operator] = None, config: Optional[KrylovConfig] = None,
                 ledger: Optional[FlopLedger] = None):
    """Dispatch on ``config.method``."""
    return gmres_solve(K, b, M, config, ledger=ledger)


def write_residuals_csv(path, history):
    with open(path, "w") as fh:
        fh.write("iter,relres\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v:.16e}\n")
