"""P1 finite element matrices for the Poisson, Helmholtz and shifted-Laplace problems.

All matrices are ``scipy.sparse.csr_matrix`` with complex128 entries and sorted
column indices. Element contributions are summed into the strictly upper
triangle and mirrored, so every assembled matrix equals its transpose bitwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh, _unique_edges


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class HelmholtzParams:
    kappa: float
    sigma: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _zero(x, y):
    return np.zeros_like(x)


@dataclass
class LoadSpec:
    """Volume source ``f`` and boundary source ``g``; both take coordinate arrays."""

    f: Field = _zero
    g: Field = _zero


def gaussian_source(x, y):
    """Sharply peaked source centred at (0.5, -0.5)."""
    return np.exp(-1e3 * ((x - 0.5) ** 2 + (y + 0.5) ** 2))


@dataclass(frozen=True)
class FemMatrices:
    K: sp.csr_matrix
    M: sp.csr_matrix
    Mb: sp.csr_matrix
    interior: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.K.shape[0]


def _symmetric_assemble(n: int, triangles: np.ndarray, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices local[e] (k x k) on index sets triangles[e]."""
    t = np.asarray(triangles)
    k = t.shape[1]
    rows, cols, vals = [], [], []
    for a in range(k):
        for b in range(a + 1, k):
            i, j = t[:, a], t[:, b]
            rows.append(np.minimum(i, j))
            cols.append(np.maximum(i, j))
            vals.append(local[:, a, b])
    upper = sp.coo_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    diag = np.zeros(n, dtype=complex)
    for a in range(k):
        np.add.at(diag, t[:, a], local[:, a, a])
    out = (upper + upper.T + sp.diags(diag)).tocsr()
    out.sort_indices()
    return out


def _element_geometry(m: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Return (areas, grads) with grads[e, k] the gradient of the k-th hat function."""
    p = m.vertices[m.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(np.abs(det) <= 1e-14 * (np.abs(d1).max() + np.abs(d2).max()) ** 2):
        raise AssemblyError("degenerate triangle in mesh")
    # rows of inv(J)^T applied to reference gradients (-1,-1), (1,0), (0,1)
    g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return 0.5 * np.abs(det), grads


def stiffness_element(p: np.ndarray) -> np.ndarray:
    m = Mesh(np.asarray(p, float), np.array([[0, 1, 2]]), np.zeros((0, 2), int))
    area, g = _element_geometry(m)
    return area[0] * g[0] @ g[0].T


def assemble_stiffness(m: Mesh) -> sp.csr_matrix:
    area, g = _element_geometry(m)
    local = area[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    return _symmetric_assemble(m.n_vertices, m.triangles, local)


_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_mass(m: Mesh) -> sp.csr_matrix:
    area, _ = _element_geometry(m)
    local = area[:, None, None] * _MASS_REF[None]
    return _symmetric_assemble(m.n_vertices, m.triangles, local)


def _check_boundary(m: Mesh) -> None:
    edges, counts, _ = _unique_edges(m.triangles)
    on_boundary = {tuple(e) for e in edges[counts == 1].tolist()}
    for a, b in m.boundary_edges.tolist():
        if (min(a, b), max(a, b)) not in on_boundary:
            raise AssemblyError(f"edge ({a}, {b}) is not on the domain boundary")


def assemble_boundary_mass(m: Mesh) -> sp.csr_matrix:
    _check_boundary(m)
    e = m.boundary_edges
    length = np.linalg.norm(m.vertices[e[:, 1]] - m.vertices[e[:, 0]], axis=1)
    local = length[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None]
    return _symmetric_assemble(m.n_vertices, e, local)


def assemble_all(m: Mesh) -> FemMatrices:
    return FemMatrices(assemble_stiffness(m), assemble_mass(m), assemble_boundary_mass(m),
                       interior=m.interior_vertices())


def assemble_helmholtz(fm: FemMatrices, p: HelmholtzParams) -> sp.csr_matrix:
    """A = K + i kappa Mb - kappa^2 M."""
    k = p.kappa
    A = (fm.K + (1j * k) * fm.Mb - (k * k) * fm.M).tocsr()
    A.sort_indices()
    return A


def assemble_shifted_laplace(fm: FemMatrices, p: HelmholtzParams) -> sp.csr_matrix:
    """B = K + i kappa Mb - kappa^2 M + i sigma M."""
    if not p.sigma > 0:
        raise ValueError(f"shifted-Laplace preconditioner needs sigma > 0, got {p.sigma}")
    k = p.kappa
    B = (fm.K + (1j * k) * fm.Mb + (1j * p.sigma - k * k) * fm.M).tocsr()
    B.sort_indices()
    return B


def assemble_poisson_dirichlet(m: Mesh, K: sp.csr_matrix | None = None) -> sp.csr_matrix:
    """Stiffness matrix with boundary rows and columns removed."""
    interior = m.interior_vertices()
    if len(interior) == 0:
        raise AssemblyError("mesh has no interior vertices")
    if K is None:
        K = assemble_stiffness(m)
    A = K[interior][:, interior].tocsr()
    A.sort_indices()
    return A


# degree-4 six point rule on the reference triangle (barycentric, weight)
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
_TRI_RULE = np.array([
    [_A1, _A1, _B1, _W1], [_A1, _B1, _A1, _W1], [_B1, _A1, _A1, _W1],
    [_A2, _A2, _B2, _W2], [_A2, _B2, _A2, _W2], [_B2, _A2, _A2, _W2],
])
_GAUSS3 = np.array([
    [0.5 - 0.5 * np.sqrt(0.6), 5.0 / 18.0],
    [0.5, 8.0 / 18.0],
    [0.5 + 0.5 * np.sqrt(0.6), 5.0 / 18.0],
])


def assemble_load(m: Mesh, load: LoadSpec) -> np.ndarray:
    """b_i = (f, phi_i) + (g, phi_i) on the boundary, by quadrature."""
    b = np.zeros(m.n_vertices, dtype=complex)
    area, _ = _element_geometry(m)
    p = m.vertices[m.triangles]
    lam = _TRI_RULE[:, :3]
    qp = np.einsum("qk,ekd->eqd", lam, p)
    fq = np.asarray(load.f(qp[..., 0], qp[..., 1]), dtype=complex) * np.ones(qp.shape[:2])
    contrib = area[:, None] * np.einsum("eq,q,qk->ek", fq, _TRI_RULE[:, 3], lam)
    for k in range(3):
        np.add.at(b, m.triangles[:, k], contrib[:, k])

    e = m.boundary_edges
    pa, pb = m.vertices[e[:, 0]], m.vertices[e[:, 1]]
    length = np.linalg.norm(pb - pa, axis=1)
    t = _GAUSS3[:, 0]
    qe = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    gq = np.asarray(load.g(qe[..., 0], qe[..., 1]), dtype=complex) * np.ones(qe.shape[:2])
    shape = np.stack([1.0 - t, t], axis=1)
    contrib = length[:, None] * np.einsum("eq,q,qk->ek", gq, _GAUSS3[:, 1], shape)
    for k in range(2):
        np.add.at(b, e[:, k], contrib[:, k])
    return b


def write_matrix_market(A: sp.spmatrix, path: str | Path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A, dtype=complex), field="complex", symmetry="general")


def read_matrix_market(path: str | Path) -> sp.csr_matrix:
    A = sp.csr_matrix(scipy.io.mmread(str(path)), dtype=complex)
    A.sort_indices()
    return A


def write_vector_csv(x: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for v in np.asarray(x, dtype=complex):
            w.writerow([repr(float(v.real)), repr(float(v.imag))])


def read_vector_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([complex(float(r), float(i)) for r, i in rows])
