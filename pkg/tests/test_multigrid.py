import numpy as np
import pytest
import scipy.sparse as sp

from helmstack import _kernels
from helmstack.core import Grid, MediaModel, ModelError
from helmstack.discretize import apply_shift, assemble_saddle, shifted_saddle
from helmstack.multigrid import (SmootherParams, build_hierarchy, build_restriction_1d,
                                 build_transfer, cell_colors, jacobi_sweep, mg_cycle,
                                 setup_vanka, staggered_intergrid, vanka_dofs, vanka_rb_sweep)
from helmstack.sparse import csr

from conftest import crand, small_media


def test_cell11_example():
    r = build_restriction_1d("cell-11", 4)
    np.testing.assert_allclose(r @ np.array([1.0, 3.0, 5.0, 7.0]), [2.0, 6.0])


def test_cell1331_interior_weights():
    r = build_restriction_1d("cell-1331", 8).toarray()
    np.testing.assert_allclose(r[1, 1:5], [0.125, 0.375, 0.375, 0.125])
    # constants are preserved away from the boundary
    np.testing.assert_allclose((r @ np.ones(8))[1:-1], 1.0)


def test_nodal121():
    r = build_restriction_1d("nodal-121", 5).toarray()
    np.testing.assert_allclose(r, [[0.5, 0.25, 0, 0, 0], [0, 0.25, 0.5, 0.25, 0],
                                   [0, 0, 0, 0.25, 0.5]])
    with pytest.raises(ModelError):
        build_restriction_1d("nodal-121", 4)
    with pytest.raises(ModelError):
        build_restriction_1d("cell-11", 5)
    with pytest.raises(ModelError):
        build_restriction_1d("cubic", 4)


def test_prolongation_interpolates_linear():
    """P = 2 R^T with full weighting reproduces linear functions at interior points."""
    r = build_restriction_1d("nodal-121", 9)
    p = 2 * r.T
    xc = np.arange(5) * 2.0
    np.testing.assert_allclose((p @ xc)[1:-1], np.arange(9.0)[1:-1])
    rc = build_restriction_1d("cell-1331", 8)
    pc = (2 * rc.T).toarray()
    xcoarse = 2 * np.arange(4) + 0.5
    np.testing.assert_allclose((pc @ xcoarse)[1:-1], (np.arange(8.0))[1:-1])


def test_staggered_specs():
    s = staggered_intergrid(2, 0, mixed=True)
    assert s.restrict == ("nodal-121", "cell-11")
    assert s.prolong == ("nodal-121", "cell-1331")
    assert staggered_intergrid(3, "cell").prolong == ("cell-1331",) * 3


def test_transfer_shapes():
    g = Grid((8, 4), (1, 1))
    R, P = build_transfer(g, 0, staggered_intergrid(2, 0))
    assert R.shape == (5 * 2, 9 * 4) and P.shape == (9 * 4, 5 * 2)
    Rm, Pm = build_transfer(g, 1, staggered_intergrid(2, 1, mixed=True))
    assert Rm.shape == (4 * 3, 8 * 5)
    assert abs(Pm - 2 * Rm.T).max() > 0  # mixed: prolongation is the full stencil


@pytest.mark.parametrize("mixed", [False, True])
def test_galerkin_identity(mixed):
    s = assemble_saddle(small_media((16, 8)), 1.0)
    H = apply_shift(s.blocks[1], s.face_rho[1], 0.3, s.omega)
    hier = build_hierarchy(H, s.grid, [1], 3, mixed_intergrid=mixed)
    for fine, coarse in zip(hier.levels[:-1], hier.levels[1:]):
        ref = fine.R.toarray() @ fine.op.toarray() @ fine.P.toarray()
        err = np.abs(coarse.op.toarray() - ref).max()
        assert err <= 1e-12 * np.abs(ref).max()
    assert hier.levels[-1].grid.cells == (4, 2)


def test_jacobi_smoothing_factor():
    """Damped Jacobi on the periodic 1D Laplacian scales mode theta by 1 - w (1 - cos theta)."""
    n, w = 64, 0.8
    L = csr(sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tolil())
    L = L.tolil()
    L[0, n - 1] = L[n - 1, 0] = -1
    L = csr(L)
    for k in (16, 24, 32):
        theta = 2 * np.pi * k / n
        e = np.exp(1j * theta * np.arange(n))
        x = e.copy()
        jacobi_sweep(L, x, np.zeros(n), w)
        np.testing.assert_allclose(x, (1 - w * (1 - np.cos(theta))) * e, atol=1e-13)
    # smoothing factor over high frequencies: max(|1-w|, |1-2w|)
    thetas = np.linspace(np.pi / 2, np.pi, 200)
    assert np.max(np.abs(1 - w * (1 - np.cos(thetas)))) == pytest.approx(0.6)


def test_jacobi_zero_diagonal():
    with pytest.raises(ModelError):
        jacobi_sweep(csr(sp.csr_matrix([[0.0, 1.0], [1.0, 1.0]])), np.zeros(2, complex),
                     np.ones(2), 0.5)


@pytest.mark.parametrize("use_numba", [True, False])
def test_jacobi_backends(rng, use_numba):
    s = assemble_saddle(small_media((8, 8)), 1.0)
    H = s.blocks[0]
    x0 = crand(rng, H.shape[0])
    b = crand(rng, H.shape[0])
    inv = 1 / H.diagonal()
    x = x0.copy()
    _kernels.jacobi_sweep(H.indptr, H.indices, H.data, inv, x, b, 0.7, use_numba=use_numba)
    np.testing.assert_allclose(x, x0 + 0.7 * inv * (b - H @ x0), atol=1e-12)


def test_vanka_layout():
    g = Grid((3, 2), (1, 1))
    d = vanka_dofs(g)
    assert d.shape == (6, 5)
    # cell (1, 1): x-faces (1,1),(2,1) -> 5, 6; y-faces (1,1),(1,2) -> 8+4, 8+7; pressure 8+9+4
    np.testing.assert_array_equal(d[4], [5, 6, 12, 15, 21])
    red, black = cell_colors(g)
    assert len(red) == len(black) == 3
    # cells of one colour never share a face
    for col in (red, black):
        faces = d[col, :4].ravel()
        assert len(set(faces)) == faces.size


def test_vanka_backends_and_exact_local_solve(rng):
    s = assemble_saddle(small_media((8, 8)), 1.0)
    K = shifted_saddle(s, 0.5)
    data = setup_vanka(K, s.grid)
    r = crand(rng, K.shape[0])
    outs = []
    for use_numba in (True, False):
        x = np.zeros(K.shape[0], complex)
        _kernels.vanka_update(x, r, data.dofs, data.inv_blocks, data.colors[0], 1.0,
                              use_numba=use_numba)
        outs.append(x)
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-12)
    # after an undamped local solve the local residual of one cell vanishes
    c = data.colors[0][3]
    dd = data.dofs[c]
    loc = K[dd][:, dd].toarray()
    np.testing.assert_allclose(loc @ outs[0][dd], r[dd], atol=1e-10)


def test_vanka_singular_block():
    g = Grid((2, 2), (1, 1))
    n = g.n_faces + g.n_cells
    with pytest.raises(ModelError, match="singular Vanka"):
        setup_vanka(sp.csr_matrix((n, n), dtype=complex), g)


def test_two_level_poisson_convergence(rng):
    """On a definite variable-coefficient problem the cycle rate is small and grid independent."""
    rates = []
    for n in (16, 32):
        g = Grid((n, n), (1.0 / n, 1.0 / n))
        mu = 1.0 + 4.0 * np.linspace(0, 1, n)[None, :] * np.ones((n, 1))
        s = assemble_saddle(MediaModel(g, 1.0, 2.0, mu, 0.0), 0.0)
        H = s.blocks[0]
        hier = build_hierarchy(H, s.grid, [0], 3, nu1=1, nu2=2)
        b = crand(rng, H.shape[0])
        x = np.zeros_like(b)
        res = []
        for _ in range(10):
            x = mg_cycle(hier, b, x)
            res.append(np.linalg.norm(b - H @ x))
        rates.append(res[-1] / res[-2])
    assert max(rates) < 0.3
    assert abs(rates[0] - rates[1]) < 0.1


def test_cycle_matches_dense_two_grid_operator():
    """Error propagation of one cycle equals S^2 (I - P Hc^-1 R H) S built densely."""
    n = 8
    g = Grid((n, n), (1.0, 1.0))
    s = assemble_saddle(MediaModel(g, 1.0, 2.0, 1.0, 0.0), 0.0)
    H = s.blocks[1]
    hier = build_hierarchy(H, g, [1], 2, nu1=1, nu2=2)
    N = H.shape[0]
    E = np.column_stack([mg_cycle(hier, np.zeros(N), col) for col in np.eye(N, dtype=complex)])
    Hd = H.toarray()
    R, P = hier.levels[0].R.toarray(), hier.levels[0].P.toarray()
    CG = np.eye(N) - P @ np.linalg.solve(R @ Hd @ P, R @ Hd)
    S = np.eye(N) - 0.8 * np.diag(1 / np.diag(Hd)) @ Hd
    np.testing.assert_allclose(E, S @ S @ CG @ S, atol=1e-12)


def test_mg_cycle_ledger_categories():
    s = assemble_saddle(small_media((16, 8)), 1.0)
    H = apply_shift(s.blocks[0], s.face_rho[0], 0.5, s.omega)
    hier = build_hierarchy(H, s.grid, [0], 2)
    mg_cycle(hier, np.ones(H.shape[0]))
    snap = hier.ledger.snapshot()
    assert set(snap) == {"smooth", "residual", "restrict", "prolong", "coarse"}
    assert snap["smooth"] == 3 * (H.nnz + H.shape[0])


def test_hierarchy_validation():
    s = assemble_saddle(small_media((8, 8)), 1.0)
    with pytest.raises(ModelError):
        build_hierarchy(s.blocks[0], s.grid, [0], 4)
    with pytest.raises(ModelError):
        build_hierarchy(s.blocks[0], s.grid, [0], 2, cycle="F")
    with pytest.raises(ModelError):
        SmootherParams(damping=(1.5,))


def test_monolithic_vanka_hierarchy_runs(rng):
    s = assemble_saddle(small_media((16, 16)), 1.0)
    K = shifted_saddle(s, 0.5)
    hier = build_hierarchy(K, s.grid, [0, 1, "cell"], 2,
                           smoother=SmootherParams("vanka-rb", (0.65, 0.5, 0.3)),
                           nu1=1, nu2=1, mixed_intergrid=True)
    b = crand(rng, K.shape[0])
    x = np.zeros_like(b)
    for _ in range(3):
        x = mg_cycle(hier, b, x)
    assert np.linalg.norm(b - K @ x) < 0.5 * np.linalg.norm(b)
