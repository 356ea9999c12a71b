"""Triangulations of the L-shaped domain (-1,1)^2 \\ (0,1)^2 and their uniform refinements."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation.

    ``vertices`` is (N, 2) float, ``triangles`` is (T, 3) int with
    counter-clockwise orientation, ``boundary_edges`` is (B, 2) int.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    level: int = 1

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted (E, 2) array."""
        return _unique_edges(self.triangles)[0]

    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices()] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_length(self) -> float:
        p = self.vertices[self.boundary_edges]
        return float(np.linalg.norm(p[:, 1] - p[:, 0], axis=1).sum())


def _unique_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (edges, counts, tri_edge) where tri_edge[t, k] indexes the edge
    opposite to local vertex k of triangle t."""
    t = np.asarray(triangles)
    local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True, return_counts=True)
    return edges, counts, inverse.ravel().reshape(-1, 3)


def _dedup(points: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(points / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    # keep first-seen order so numbering is stable
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return points[first[order]], rank[inverse.ravel()]


def _boundary_from_triangles(triangles: np.ndarray) -> np.ndarray:
    t = np.asarray(triangles)
    directed = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    _, inverse, counts = np.unique(np.sort(directed, axis=1), axis=0,
                                   return_inverse=True, return_counts=True)
    # keep the orientation inherited from the (ccw) triangle
    return directed[counts[inverse.ravel()] == 1]


def make_lshape_coarse(cells: int = 4) -> Mesh:
    """Level-one mesh of the L-shape.

    Each of the three unit squares is split into ``cells x cells`` squares and
    every square into four right triangles around its centre. ``cells=4`` gives
    113 vertices and 192 triangles.
    """
    step = 1.0 / cells
    corners = [(-1.0, 0.0), (-1.0, -1.0), (0.0, -1.0)]
    pts = []
    tris = []
    for x0, y0 in corners:
        for i in range(cells):
            for j in range(cells):
                xa, ya = x0 + i * step, y0 + j * step
                xb, yb = xa + step, ya + step
                base = len(pts)
                pts.extend([(xa, ya), (xb, ya), (xb, yb), (xa, yb),
                            (0.5 * (xa + xb), 0.5 * (ya + yb))])
                c = base + 4
                for k in range(4):
                    tris.append((base + k, base + (k + 1) % 4, c))
    verts, relabel = _dedup(np.array(pts))
    triangles = relabel[np.array(tris)]
    mesh = Mesh(verts, triangles, _boundary_from_triangles(triangles), level=1)
    check_mesh(mesh)
    return mesh


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: every triangle is split into four through its edge midpoints."""
    edges, _, tri_edge = _unique_edges(m.triangles)
    nv = m.n_vertices
    mids = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
    verts = np.vstack([m.vertices, mids])
    a, b, c = m.triangles.T
    # tri_edge[:, k] is the edge opposite local vertex k
    m_bc, m_ca, m_ab = (nv + tri_edge[:, k] for k in range(3))
    triangles = np.concatenate([
        np.stack([a, m_ab, m_ca], axis=1),
        np.stack([m_ab, b, m_bc], axis=1),
        np.stack([m_ca, m_bc, c], axis=1),
        np.stack([m_ab, m_bc, m_ca], axis=1),
    ])
    lookup = {tuple(e): nv + k for k, e in enumerate(edges)}
    bnd = []
    for va, vb in m.boundary_edges:
        mid = lookup[(min(va, vb), max(va, vb))]
        bnd.append((va, mid))
        bnd.append((mid, vb))
    return Mesh(verts, triangles, np.array(bnd, dtype=np.int64).reshape(-1, 2), level=m.level + 1)


def mesh_hierarchy(level: int, cells: int = 4) -> Mesh:
    """Return the mesh of the requested level (level 1 is the coarse mesh)."""
    if level < 1:
        raise MeshError(f"mesh level must be >= 1, got {level}")
    m = make_lshape_coarse(cells)
    for _ in range(level - 1):
        m = refine_uniform(m)
    return m


def mesh_size(m: Mesh) -> float:
    """Largest edge length over all triangles."""
    edges = m.edges()
    d = m.vertices[edges[:, 1]] - m.vertices[edges[:, 0]]
    return float(np.sqrt((d ** 2).sum(axis=1)).max())


def check_mesh(m: Mesh, area: float | None = None) -> None:
    """Raise MeshError if a structural invariant fails."""
    t = m.triangles
    if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
        raise MeshError("triangle with repeated vertex")
    if np.any(m.signed_areas() <= 0):
        raise MeshError("triangle with non-positive signed area")
    if not np.all(np.isfinite(m.vertices)):
        raise MeshError("non-finite vertex coordinates")
    _, counts, _ = _unique_edges(t)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    if int((counts == 1).sum()) != len(m.boundary_edges):
        raise MeshError("boundary edge list does not match triangle topology")
    keys = np.round(m.vertices / 1e-12).astype(np.int64)
    if len(np.unique(keys, axis=0)) != m.n_vertices:
        raise MeshError("duplicate vertices")
    if area is not None and abs(m.signed_areas().sum() - area) > 1e-12:
        raise MeshError("triangles do not cover the domain")


def save_mesh(m: Mesh, path: str | Path) -> None:
    lines = [f"vertices {m.n_vertices} triangles {m.n_triangles} "
             f"boundary_edges {len(m.boundary_edges)} level {m.level}"]
    lines += [f"{x!r} {y!r}" for x, y in m.vertices.tolist()]
    lines += [f"{a} {b} {c}" for a, b, c in m.triangles.tolist()]
    lines += [f"{a} {b}" for a, b in m.boundary_edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path: str | Path) -> Mesh:
    rows = Path(path).read_text().splitlines()
    head = rows[0].split()
    if head[0::2] != ["vertices", "triangles", "boundary_edges", "level"]:
        raise MeshError(f"bad mesh header: {rows[0]!r}")
    nv, nt, nb, level = (int(v) for v in head[1::2])
    body = rows[1:]
    verts = np.array([[float(v) for v in r.split()] for r in body[:nv]]).reshape(-1, 2)
    tris = np.array([[int(v) for v in r.split()] for r in body[nv:nv + nt]], dtype=np.int64).reshape(-1, 3)
    bnd = np.array([[int(v) for v in r.split()] for r in body[nv + nt:nv + nt + nb]],
                   dtype=np.int64).reshape(-1, 2)
    return Mesh(verts, tris, bnd, level)
