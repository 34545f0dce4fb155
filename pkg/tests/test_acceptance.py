"""Acceptance criteria 1-10, each printed as one pass/fail line.

The bench suites in ``helmstack.experiments`` compute the same quantities,
so ``helmstack bench <suite>`` reproduces any row shown here.
"""
import json
import pathlib
import time

import numpy as np
import pytest

from helmstack import experiments as ex
from helmstack.media3d import solve_3d_default

from conftest import ACCEPTANCE

BASELINES = json.loads((pathlib.Path(__file__).with_name("baselines.json")).read_text())


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_exact_commutation():
    t0 = time.perf_counter()
    r2 = ex.commutator_ratio((16, 16))
    r3 = ex.commutator_ratio((8, 8, 8))
    dt = time.perf_counter() - t0
    record(1, r2 <= 1e-12 and r3 <= 1e-12 and dt < 1.0,
           f"||Xi||/||G^T A|| = {r2:.1e} (16x16), {r3:.1e} (8x8x8); {dt:.2f}s")


def test_criterion_02_spectral_equivalence():
    parts, ok = [], True
    for cells in ex.THEOREM_GRIDS:
        r = ex.theorem_report(cells)
        good = (r.spectra_match and r.multiplicity_ok and r.power_rel_error <= 1e-3)
        ok &= good
        parts.append(f"{cells[0]}x{cells[1]}: dH={r.hausdorff_TZ:.1e} "
                     f"mult(1)={r.unit_multiplicity}>={r.n} rho={r.rho_Z_dense:.4f} "
                     f"power err={r.power_rel_error:.1e}")
    record(2, ok, "; ".join(parts))


def test_criterion_03_direct_block_counts():
    rows = [ex.table1_row(cells) for cells in ((200, 64), (400, 128))]
    ok = all(r["pass"] == "pass" for r in rows)
    detail = "; ".join(
        f"{r['grid']}: " + "/".join(str(r[f"lambda*{f}"]) for f in ex.TABLE1_FACTORS)
        + f" (spread {r['spread']})" for r in rows)
    record(3, ok, detail + f"; limits <= {ex.TABLE1_MAX_COUNT}, spread <= {ex.TABLE1_MAX_SPREAD}")


def test_criterion_04_multigrid_counts_and_cost():
    pair = ex.table3_pair((400, 128), levels=2)
    ba, mono = pair["block-acoustic"], pair["monolithic"]
    lo, hi = ex.TABLE3_WINDOW
    ok = (ba["converged"] and lo <= ba["iterations"] <= hi
          and ba["flops_1e4_per_cell"] < mono["flops_1e4_per_cell"])
    record(4, ok, f"block-acoustic {ba['iterations']} its in [{lo},{hi}], "
                  f"{ba['flops_1e4_per_cell']:.3f} vs monolithic "
                  f"{mono['flops_1e4_per_cell']:.3f} (1e4 units/cell, {mono['iterations']} its)")


def test_criterion_05_cycle_flops():
    table = ex.flop_rows((400, 128))
    by = {r.label: r for r in table.rows}
    checks = {k: abs(by[k].cycle_per_cell - t) <= ex.FLOP_REL_TOL * t
              for k, t in ex.FLOP_TARGETS.items()}
    record(5, all(checks.values()),
           ", ".join(f"{k} {by[k].cycle_per_cell:.1f} (target {t:g} +-5%)"
                     for k, t in ex.FLOP_TARGETS.items())
           + f"; coarse nnz ratio {table.coarse_ratio('monolithic', 'block-acoustic'):.2f}")


def test_criterion_06_mu_zero_reduction():
    res = ex.mu_zero_residual((16, 16))
    record(6, res <= 1e-10, f"acoustic residual {res:.1e}")


def test_criterion_07_shift_sweep():
    rows = ex.shift_sweep((400, 128))
    v = ex.sweep_verdict(rows)
    ok = v["monotone"] and v["below_one_at_smallest_shift"]
    record(7, ok, "rho(Z): " + ", ".join(f"{a:g}->{r.rho:.3f}" for a, r in rows))


def test_criterion_08_schur_baselines():
    out = ex.compare_counts()
    verdict = ex.compare_verdicts(out)
    detail = "; ".join(f"lambda*{f} Gs{gs}: " + "/".join(str(c[k]) for k in ex.COMPARE_KINDS)
                       for (f, gs), c in out.items())
    record(8, all(verdict.values()), detail + " (block/fp/bfbt)")


def test_criterion_09_linearity_orthogonality_galerkin_spmv():
    import scipy.sparse as sp
    from helmstack.core import select_omega
    from helmstack.discretize import apply_shift, assemble_saddle, point_source
    from helmstack.krylov import KrylovConfig, gmres_solve
    from helmstack.multigrid import build_hierarchy
    from helmstack.precond import BlockAcousticPreconditioner, default_block_config
    from helmstack.sparse import spmv

    rng = np.random.default_rng(9)
    media = ex.linear_with_abc((32, 32))
    s = assemble_saddle(media, select_omega(media))
    N = s.n + s.m
    cplx = lambda n: rng.standard_normal(n) + 1j * rng.standard_normal(n)

    errs = {}
    for mode in ("direct", "multigrid"):
        M = BlockAcousticPreconditioner(s, default_block_config(2, mode, alpha=0.1))
        x, y = cplx(N), cplx(N)
        a, b = 1.5 - 0.5j, -0.3 + 2j
        ref = a * M(x) + b * M(y)
        errs[f"lin-{mode}"] = np.linalg.norm(M(a * x + b * y) - ref) / np.linalg.norm(ref)
    M = BlockAcousticPreconditioner(s, default_block_config(2, "multigrid", alpha=0.1))
    _, rep = gmres_solve(s.full(), point_source(s.grid), M, KrylovConfig(), record_basis=True)
    V = rep.basis
    errs["orth"] = np.abs(V.conj().T @ V - np.eye(V.shape[1])).max()
    H = apply_shift(s.blocks[0], s.face_rho[0], 0.1, s.omega)
    hier = build_hierarchy(H, s.grid, [0], 3)
    g = 0.0
    for f, c in zip(hier.levels[:-1], hier.levels[1:]):
        ref = f.R.toarray() @ f.op.toarray() @ f.P.toarray()
        g = max(g, np.abs(c.op.toarray() - ref).max() / np.abs(ref).max())
    errs["galerkin"] = g
    K = s.full()
    v = cplx(N)
    dense = K.toarray() @ v
    errs["spmv"] = np.abs(spmv(K, v) - dense).max() / np.abs(dense).max()
    ok = (errs["lin-direct"] <= 1e-12 and errs["lin-multigrid"] <= 1e-12
          and errs["orth"] <= 1e-10 and errs["galerkin"] <= 1e-12 and errs["spmv"] <= 1e-13)
    record(9, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))


def test_criterion_10_3d_smoke():
    media = ex.homogeneous_with_abc((32, 32, 16))
    _, rep, _ = solve_3d_default(media, levels=2, alpha=0.1)
    base = BASELINES["smoke_3d_32x32x16_levels2_alpha0.1"]
    ok = rep.converged and rep.true_relres <= 1e-6 and rep.iterations <= 60
    record(10, ok, f"{rep.iterations} GMRES(5) iterations, relres {rep.true_relres:.1e} "
                   f"(limit 60, baseline {base})")
    assert rep.iterations == base, "3D iteration count drifted from the stored baseline"
