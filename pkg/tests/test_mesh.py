import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helmpseudo.mesh import (Mesh, MeshError, check_mesh, load_mesh, make_lshape_coarse,
                             mesh_hierarchy, mesh_size, refine_uniform, save_mesh)

from conftest import level_mesh

# measured on the generated hierarchy; V_{k+1} = V_k + E_k and T_{k+1} = 4 T_k
COUNTS = {1: (113, 192, 304), 2: (417, 768, 1184), 3: (1601, 3072, 4672)}


def unit_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
                np.array([[0, 1], [1, 2], [2, 0]]))


def test_coarse_mesh_area_perimeter_euler(coarse):
    assert 80 <= coarse.n_vertices <= 130
    assert abs(coarse.signed_areas().sum() - 3.0) <= 1e-12
    assert abs(coarse.boundary_length() - 8.0) <= 1e-12
    E = len(coarse.edges())
    assert coarse.n_vertices - E + coarse.n_triangles == 1


@pytest.mark.parametrize("level", [1, 2, 3])
def test_hierarchy_counts_and_invariants(level):
    m = level_mesh(level)
    V, T, E = COUNTS[level]
    assert (m.n_vertices, m.n_triangles, len(m.edges())) == (V, T, E)
    check_mesh(m, area=3.0)
    assert abs(m.boundary_length() - 8.0) <= 1e-12
    assert np.all(m.signed_areas() > 0)
    assert m.level == level


def test_recurrence():
    for k in (1, 2):
        V, T, E = COUNTS[k]
        assert COUNTS[k + 1][0] == V + E
        assert COUNTS[k + 1][1] == 4 * T


def test_refine_single_triangle():
    r = refine_uniform(unit_triangle())
    assert r.n_triangles == 4 and r.n_vertices == 6
    assert abs(r.signed_areas().sum() - 0.5) < 1e-15
    assert len(r.boundary_edges) == 6


def test_mesh_size_halves(coarse):
    h = [mesh_size(level_mesh(k)) for k in (1, 2, 3)]
    assert h[0] == pytest.approx(0.25, abs=1e-14)
    for a, b in zip(h, h[1:]):
        assert abs(b - a / 2) <= 1e-14


def test_mesh_size_examples():
    assert mesh_size(unit_triangle()) == pytest.approx(math.sqrt(2), abs=1e-15)
    eq = Mesh(np.array([[0, 0], [0.5, 0], [0.25, 0.25 * math.sqrt(3)]]), np.array([[0, 1, 2]]),
              np.zeros((0, 2), int))
    assert mesh_size(eq) == pytest.approx(0.5, abs=1e-15)


def test_interior_boundary_partition(coarse):
    b = coarse.boundary_vertices()
    i = coarse.interior_vertices()
    assert len(b) + len(i) == coarse.n_vertices
    assert len(i) == 81
    assert len(np.intersect1d(b, i)) == 0


def test_check_mesh_rejects_bad_input():
    m = unit_triangle()
    flipped = Mesh(m.vertices, m.triangles[:, ::-1], m.boundary_edges)
    with pytest.raises(MeshError):
        check_mesh(flipped)
    dup = Mesh(np.vstack([m.vertices, m.vertices[:1]]), m.triangles, m.boundary_edges)
    with pytest.raises(MeshError):
        check_mesh(dup)
    with pytest.raises(MeshError):
        check_mesh(m, area=1.0)
    with pytest.raises(MeshError):
        mesh_hierarchy(0)


def test_save_load_roundtrip(tmp_path, coarse):
    p = tmp_path / "m.txt"
    save_mesh(coarse, p)
    first = p.read_text().splitlines()[0]
    assert first == "vertices 113 triangles 192 boundary_edges 32 level 1"
    m2 = load_mesh(p)
    assert np.array_equal(m2.vertices, coarse.vertices)
    assert np.array_equal(m2.triangles, coarse.triangles)
    assert np.array_equal(m2.boundary_edges, coarse.boundary_edges)
    assert m2.level == 1


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("nodes 3\n")
    with pytest.raises(MeshError):
        load_mesh(p)


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_refinement_preserves_area_and_orientation(c):
    p = np.array(c).reshape(3, 2)
    area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
    if abs(area) < 1e-3:
        return
    tri = [0, 1, 2] if area > 0 else [0, 2, 1]
    m = Mesh(p, np.array([tri]), np.array([[tri[0], tri[1]], [tri[1], tri[2]], [tri[2], tri[0]]]))
    r = refine_uniform(refine_uniform(m))
    assert np.all(r.signed_areas() > 0)
    assert r.signed_areas().sum() == pytest.approx(abs(area), rel=1e-12)
    assert mesh_size(r) == pytest.approx(mesh_size(m) / 4, rel=1e-12)


@given(st.integers(2, 6))
def test_coarse_cells_parameter(cells):
    m = make_lshape_coarse(cells)
    check_mesh(m, area=3.0)
    assert mesh_size(m) == pytest.approx(1.0 / cells, rel=1e-12)
