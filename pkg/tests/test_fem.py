import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from helmpseudo import fem
from helmpseudo.mesh import Mesh, refine_uniform

from conftest import helmholtz, level_fem, level_mesh, shifted

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def one_triangle(p):
    return Mesh(np.asarray(p, float), np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]))


def cotangent_stiffness(p):
    """Independent oracle: K_ij = -cot(angle opposite edge ij) / 2."""
    K = np.zeros((3, 3))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        u, v = p[i] - p[k], p[j] - p[k]
        cot = (u @ v) / abs(u[0] * v[1] - u[1] * v[0])
        K[i, j] = K[j, i] = -0.5 * cot
    K[np.diag_indices(3)] = -K.sum(axis=1)
    return K


def midpoint_mass(p):
    """Edge-midpoint rule, exact for quadratics: oracle for int phi_i phi_j."""
    area = 0.5 * abs((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
    lam = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    return area / 3 * lam.T @ lam


triangles = st.lists(st.floats(-2, 2), min_size=6, max_size=6).map(lambda c: np.array(c).reshape(3, 2))


def ccw(p):
    a = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    return a, (p if a > 0 else p[[0, 2, 1]])


def test_unit_element_matrices():
    assert np.allclose(fem.stiffness_element(UNIT),
                       [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15, rtol=0)
    M = fem.assemble_mass(one_triangle(UNIT)).toarray()
    assert np.allclose(M, np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24, atol=1e-16, rtol=0)
    edge = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), np.array([[0, 1]]))
    Mb = fem.assemble_boundary_mass(edge).toarray()[:2, :2]
    assert np.allclose(Mb, np.array([[2, 1], [1, 2]]) / 6, atol=1e-16, rtol=0)


@given(triangles)
def test_element_matrices_match_oracles(p):
    a, p = ccw(p)
    if abs(a) < 1e-2:
        return
    K = fem.stiffness_element(p)
    assert np.abs(K - cotangent_stiffness(p)).max() <= 1e-10 * max(1.0, np.abs(K).max())
    M = fem.assemble_mass(one_triangle(p)).toarray().real
    assert np.abs(M - midpoint_mass(p)).max() <= 1e-12


def test_degenerate_triangle_rejected():
    with pytest.raises(fem.AssemblyError):
        fem.assemble_stiffness(one_triangle([[0, 0], [1, 0], [2, 0]]))


def test_boundary_edge_off_boundary_rejected(coarse):
    interior_edge = None
    edges = coarse.edges()
    bset = {tuple(sorted(e)) for e in coarse.boundary_edges.tolist()}
    for e in edges.tolist():
        if tuple(e) not in bset:
            interior_edge = e
            break
    bad = Mesh(coarse.vertices, coarse.triangles, np.vstack([coarse.boundary_edges, [interior_edge]]))
    with pytest.raises(fem.AssemblyError):
        fem.assemble_boundary_mass(bad)


@pytest.mark.parametrize("level", [1, 2])
def test_global_sums(level):
    fm = level_fem(level)
    m = level_mesh(level)
    assert np.abs(np.asarray(fm.K.sum(axis=1))).max() <= 1e-12
    assert abs(fm.M.sum() - 3.0) <= 1e-12
    assert abs(fm.Mb.sum() - 8.0) <= 1e-12
    assert abs(fm.Mb[m.interior_vertices()]).sum() == 0
    x = m.vertices[:, 0]
    assert abs(x @ (fm.K @ x) - 3.0) <= 1e-10


def test_exact_symmetry_and_types(coarse):
    fm = level_fem(1)
    for S in (fm.K, fm.M, fm.Mb, helmholtz(1, 8 * math.pi)):
        assert S.dtype == np.complex128
        assert (S != S.T).nnz == 0
        assert S.has_sorted_indices
    A = helmholtz(1, 8 * math.pi)
    assert (A != A.conj().T).nnz > 0


def test_mass_positive_definite_and_kernel(coarse):
    fm = level_fem(1)
    assert np.linalg.eigvalsh(fm.M.toarray()).min() > 0
    w = np.linalg.eigvalsh(fm.K.toarray())
    assert abs(w[0]) < 1e-12 and w[1] > 1e-3


def test_helmholtz_constant_vector():
    k = 8 * math.pi
    A = helmholtz(1, k)
    one = np.ones(A.shape[0])
    val = one @ (A @ one)
    assert val == pytest.approx(-3 * k * k + 8j * k, rel=1e-10)
    K = level_fem(1).K
    small = fem.assemble_helmholtz(level_fem(1), fem.HelmholtzParams(1e-12))
    assert abs(small - K).max() < 1e-11


def test_helmholtz_rayleigh_envelope(rng):
    k = 4 * math.pi
    fm = level_fem(1)
    A = helmholtz(1, k)
    kmin, kmax = np.linalg.eigvalsh(fm.K.toarray())[[0, -1]]
    mmax = np.linalg.eigvalsh(fm.M.toarray())[-1]
    bmax = np.linalg.eigvalsh(fm.Mb.toarray())[-1]
    for _ in range(100):
        x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        q = np.vdot(x, A @ x) / np.vdot(x, x)
        assert q.imag >= 0
        assert q.imag <= k * bmax + 1e-12
        assert kmin - k * k * mmax - 1e-9 <= q.real <= kmax + 1e-9


def test_shifted_laplace_loss(rng):
    k = 4 * math.pi
    s = 0.5 * k * k
    A, B = shifted(1, k, s)
    M = level_fem(1).M
    for _ in range(100):
        x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        assert np.vdot(x, B @ x).imag >= s * np.vdot(x, M @ x).real * (1 - 1e-12)
    assert np.linalg.svd(B.toarray(), compute_uv=False)[-1] > 0
    assert abs(B - A - 1j * s * M).max() <= 1e-12 * abs(B).max()
    with pytest.raises(ValueError):
        fem.assemble_shifted_laplace(level_fem(1), fem.HelmholtzParams(k, 0.0))


def test_params_validation():
    with pytest.raises(ValueError):
        fem.HelmholtzParams(0.0)
    with pytest.raises(ValueError):
        fem.HelmholtzParams(1.0, -1.0)


def test_poisson_dirichlet():
    m1, m2 = level_mesh(1), level_mesh(2)
    A1 = fem.assemble_poisson_dirichlet(m1)
    assert A1.shape == (m1.n_vertices - len(m1.boundary_vertices()),) * 2
    assert np.abs(A1.imag).max() == 0 and (A1 != A1.T).nnz == 0
    l1 = np.linalg.eigvalsh(A1.toarray().real)[0]
    l2 = np.linalg.eigvalsh(fem.assemble_poisson_dirichlet(m2).toarray().real)[0]
    assert l1 > 0
    # frozen: smallest eigenvalue of the level-1 matrix (dense symmetric eigensolve)
    assert l1 == pytest.approx(0.30173203412401445, rel=1e-10)
    assert 3.5 <= l1 / l2 <= 4.5
    tiny = one_triangle(UNIT)
    with pytest.raises(fem.AssemblyError):
        fem.assemble_poisson_dirichlet(tiny)


def test_mass_and_stiffness_scaling():
    ev = {k: np.linalg.eigvalsh(level_fem(k).M.toarray().real) for k in (1, 2, 3)}
    kmax = {k: sla.eigh(level_fem(k).K.toarray().real, eigvals_only=True, subset_by_index=[level_fem(k).n - 1] * 2)[0]
            for k in (1, 2)}
    for k in (1, 2):
        assert 2.0 <= ev[k][0] / ev[k + 1][0] <= 8.0
        assert 2.0 <= ev[k][-1] / ev[k + 1][-1] <= 8.0
    assert 0.5 <= kmax[1] / kmax[2] <= 2.0


def test_load_partition_of_unity(coarse):
    one = lambda x, y: np.ones_like(x)
    assert fem.assemble_load(coarse, fem.LoadSpec(f=one)).sum() == pytest.approx(3.0, abs=1e-10)
    assert fem.assemble_load(coarse, fem.LoadSpec(g=one)).sum() == pytest.approx(8.0, abs=1e-10)


def test_gaussian_load_converges():
    # the source decays to exp(-250) at the boundary, so its integral over the
    # domain equals the full-plane value pi/1000 to double precision
    exact = math.pi / 1000
    sums = [fem.assemble_load(level_mesh(k), fem.LoadSpec(f=fem.gaussian_source)).sum().real
            for k in (1, 2, 3, 4)]
    diffs = np.abs(np.diff(sums))
    assert np.all(diffs[1:] * 4 <= diffs[:-1])
    assert abs(sums[-1] - exact) < 1e-7


@given(st.randoms(use_true_random=False))
def test_permutation_equivariance(r):
    m = level_mesh(1)
    perm = list(range(m.n_vertices))
    r.shuffle(perm)
    perm = np.array(perm)
    inv = np.argsort(perm)
    # new vertex j is old vertex perm[j]
    m2 = Mesh(m.vertices[perm], inv[m.triangles], inv[m.boundary_edges])
    fm, fm2 = level_fem(1), fem.assemble_all(m2)
    for S, S2 in ((fm.K, fm2.K), (fm.M, fm2.M), (fm.Mb, fm2.Mb)):
        assert abs(S[perm][:, perm] - S2).max() <= 1e-14


def test_matrix_market_and_csv_roundtrip(tmp_path, rng):
    A = helmholtz(1, 4 * math.pi)
    fem.write_matrix_market(A, tmp_path / "A.mtx")
    A2 = fem.read_matrix_market(tmp_path / "A.mtx")
    assert abs(A - A2).max() == 0
    x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    fem.write_vector_csv(x, tmp_path / "x.csv")
    assert np.array_equal(fem.read_vector_csv(tmp_path / "x.csv"), x)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "re,im"
