import numpy as np
import pytest

from helmstack.core import ModelError, builtin_grid, builtin_media, select_omega
from helmstack.discretize import assemble_saddle, build_Ap, point_source
from helmstack.experiments import homogeneous_with_abc, linear_with_abc
from helmstack.krylov import KrylovConfig, gmres_solve
from helmstack.precond import (BlockAcousticPreconditioner, BlockSolverConfig,
                               MonolithicPreconditioner, SchurApproxPreconditioner, ZOperator,
                               attenuated, build_T_and_verify, default_block_config, hausdorff,
                               make_preconditioner, z_matvec)

from conftest import constant_media, crand, small_media


def saddle_for(cells=(16, 16), name="linear"):
    m = small_media(cells, name=name, abc=2)
    return assemble_saddle(m, select_omega(m))


PRECS = {
    "block-direct": lambda s: BlockAcousticPreconditioner(s),
    "block-mg": lambda s: BlockAcousticPreconditioner(
        s, default_block_config(2, "multigrid", alpha=0.2, levels=2)),
    "block-mg3": lambda s: BlockAcousticPreconditioner(
        s, default_block_config(2, "multigrid", alpha=0.4, levels=3, cycle="V")),
    "fp": lambda s: SchurApproxPreconditioner(s, "fp"),
    "bfbt": lambda s: SchurApproxPreconditioner(s, "bfbt"),
    "monolithic": lambda s: MonolithicPreconditioner(s, alpha=0.2),
}


@pytest.mark.parametrize("kind", sorted(PRECS))
def test_preconditioner_linearity(kind, rng):
    s = saddle_for()
    M = PRECS[kind](s)
    N = s.n + s.m
    x, y = crand(rng, N), crand(rng, N)
    a, b = 0.7 - 1.3j, 2.1 + 0.4j
    lhs = M(a * x + b * y)
    rhs = a * M(x) + b * M(y)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_block_acoustic_formula(rng):
    """Direct mode equals the dense three-step formula."""
    s = saddle_for((8, 8))
    M = BlockAcousticPreconditioner(s)
    A, G = s.A.toarray(), s.G.toarray()
    Hp, Ap = M.Hp.toarray(), M.Ap.toarray()
    r = crand(rng, s.n + s.m)
    ru, rp = r[:s.n], r[s.n:]
    ep = np.linalg.solve(Hp, G.T @ ru - Ap @ rp)
    eu = np.linalg.solve(A, ru - G @ ep)
    np.testing.assert_allclose(M(r), np.concatenate([eu, ep]), atol=1e-10)
    assert M.applications == 1 and M.n_solvers == 3


def test_exact_when_commutator_vanishes(rng):
    """Homogeneous media without a sponge: Xi = 0, so the preconditioner inverts K."""
    m = builtin_media("homogeneous", builtin_grid("homogeneous", (16, 8)))
    s = assemble_saddle(m, select_omega(m))
    M = BlockAcousticPreconditioner(s)
    x = crand(rng, s.n + s.m)
    np.testing.assert_allclose(M(s.full() @ x), x, rtol=0, atol=1e-9 * np.abs(x).max())
    _, rep = gmres_solve(s.full(), point_source(s.grid), M, KrylovConfig())
    assert rep.converged and rep.iterations <= 2


def test_periodic_exact_commutation_gmres(rng):
    m = constant_media((8, 8))
    s = assemble_saddle(m, 1.3, periodic=True)
    M = BlockAcousticPreconditioner(s)
    b = crand(rng, s.n + s.m)
    _, rep = gmres_solve(s.full(), b, M, KrylovConfig())
    assert rep.converged and rep.iterations <= 2


def test_bfbt_exact_for_scalar_leading_block(rng):
    """With A = c I the BFBt formula gives the exact Schur inverse (G^T A^-1 G)^-1."""
    import dataclasses
    import scipy.sparse as sp
    s0 = saddle_for((8, 8))
    c = 2.5 - 0.5j
    blocks = [sp.csr_matrix(c * sp.identity(b.shape[0], dtype=complex)) for b in s0.blocks]
    s = dataclasses.replace(s0, blocks=blocks, _full=None)
    M = SchurApproxPreconditioner(s, "bfbt")
    G = s.G.toarray()
    t = crand(rng, s.m)
    S = G.T @ G / c
    np.testing.assert_allclose(M.schur_inverse(S @ t), t, atol=1e-9 * np.abs(t).max())


def test_schur_and_factory_errors():
    s = saddle_for((8, 8))
    with pytest.raises(ModelError):
        SchurApproxPreconditioner(s, "lsc")
    with pytest.raises(ModelError):
        make_preconditioner("ilu", s)
    with pytest.raises(ModelError):
        BlockSolverConfig(mode="iterative")
    assert make_preconditioner("none", s) is None
    assert isinstance(make_preconditioner("monolithic", s, alpha=0.3), MonolithicPreconditioner)


def test_block_ledger_categories(rng):
    s = saddle_for((16, 16))
    M = PRECS["block-mg"](s)
    M(crand(rng, s.n + s.m))
    snap = M.ledger.snapshot()
    assert {"smooth", "residual", "restrict", "prolong", "rhs", "backsub", "coarse"} <= set(snap)
    assert snap["backsub"] == s.G.nnz
    assert snap["rhs"] == s.B.nnz + M.Ap.nnz
    # deterministic and additive
    M2 = PRECS["block-mg"](s)
    v = crand(rng, s.n + s.m)
    M2(v)
    first = M2.ledger.snapshot()
    M2(v)
    assert M2.ledger.snapshot() == {k: 2 * u for k, u in first.items()}


def test_z_matvec_matches_dense_formula(rng):
    m = small_media((8, 8))
    w = select_omega(m)
    z = ZOperator(m, w)
    s = z.saddle
    A, G = s.A.toarray(), s.G.toarray()
    Ap = build_Ap(m, w).toarray()
    Hp = G.T @ G + Ap @ s.C.toarray()
    Xi = G.T @ A - Ap @ G.T
    Zd = Xi @ np.linalg.solve(A, G @ np.linalg.inv(Hp))
    v = crand(rng, s.m)
    np.testing.assert_allclose(z_matvec(z, v), Zd @ v, atol=1e-9 * np.abs(Zd @ v).max())
    j = 5
    np.testing.assert_allclose(z.dense()[:, j], Zd[:, j], atol=1e-9 * np.abs(Zd).max())


def test_shifted_z_is_attenuated_media():
    m = small_media((8, 8))
    w = select_omega(m)
    a = attenuated(m, 0.1, w)
    np.testing.assert_allclose(a.gamma, m.gamma + 0.1 * w)
    assert attenuated(m, 0.0, w) is m
    z1 = ZOperator(m, w, alpha=0.1)
    z2 = ZOperator(a, w)
    v = np.arange(z1.m, dtype=complex)
    np.testing.assert_allclose(z1(v), z2(v))


def stationary_error(media, steps, rng):
    s = assemble_saddle(media, select_omega(media))
    M = BlockAcousticPreconditioner(s)
    K = s.full()
    x_true = crand(rng, K.shape[0])
    b = K @ x_true
    x = np.zeros_like(b)
    for _ in range(steps):
        x = x + M(b - K @ x)
    return np.linalg.norm(x - x_true) / np.linalg.norm(x_true)


@pytest.mark.parametrize("cells,converges", [((12, 12), True), ((16, 8), False)])
def test_stationary_iteration_iff_rho_below_one(cells, converges, rng):
    media = homogeneous_with_abc(cells)
    rho = ZOperator(media, select_omega(media)).spectral_radius(tol=1e-8, max_iter=5000).rho
    assert (rho < 1) == converges
    err = stationary_error(media, 200, rng)
    if converges:
        assert err < 1e-6
    else:
        assert err > 1e3


def test_frequency_insensitivity_of_commutator():
    """+-20% in omega barely moves ||Xi|| but moves rho(Z) a lot."""
    media = linear_with_abc((32, 32))
    w0 = select_omega(media)
    norms, rhos = [], []
    for f in (0.8, 1.0, 1.2):
        z = ZOperator(media, f * w0)
        norms.append(np.sqrt((np.abs(z.xi.data) ** 2).sum()))
        rhos.append(z.spectral_radius(tol=1e-6, max_iter=3000).rho)
    for i in (0, 2):
        assert abs(norms[i] / norms[1] - 1) < 0.02
        assert abs(rhos[i] / rhos[1] - 1) > 0.10


def test_mass_part_of_commutator_is_small_on_linear_media():
    media = linear_with_abc((64, 32))
    z = ZOperator(media, select_omega(media))
    fro = lambda a: np.sqrt((np.abs(a.data) ** 2).sum())
    assert fro(z.comm.xi_mass) < 0.2 * fro(z.comm.xi_lap)


def test_homogeneous_commutator_is_pure_mass():
    """For constant mu the Laplacian part of Xi vanishes; only the sponge's gamma remains."""
    z = ZOperator(homogeneous_with_abc((16, 16)), 1.0)
    assert abs(z.comm.xi_lap).max() < 1e-10
    assert abs(z.comm.xi_mass).max() > 1e-3


def test_hausdorff():
    assert hausdorff([0, 1], [1, 0]) == 0
    assert hausdorff([0], [0, 2]) == 2
    assert hausdorff([], []) == 0
    assert hausdorff([], [1]) == np.inf


def test_theorem_small_with_shift():
    media = homogeneous_with_abc((8, 8))
    r = build_T_and_verify(media, select_omega(media), alpha=0.3)
    assert r.spectra_match and r.yz_match and r.multiplicity_ok
    assert r.power_rel_error < 1e-3
    d = r.as_dict()
    assert d["n"] == 144 and d["m"] == 64
    with pytest.raises(ModelError):
        build_T_and_verify(homogeneous_with_abc((32, 32)), 1.0)
