"""Pseudospectra of finite element Helmholtz operators on the L-shaped domain."""

from .fem import HelmholtzParams, assemble_all, assemble_helmholtz, assemble_shifted_laplace
from .linalg import ShiftOperator, fov_boundary, gmres, preconditioned_operator
from .mesh import Mesh, mesh_hierarchy
from .pseudospectrum import LevelSpec, compute_pseudospectrum, contains

__all__ = [
    "HelmholtzParams", "Mesh", "LevelSpec", "ShiftOperator",
    "assemble_all", "assemble_helmholtz", "assemble_shifted_laplace",
    "compute_pseudospectrum", "contains", "fov_boundary", "gmres",
    "mesh_hierarchy", "preconditioned_operator",
]
__version__ = "0.1.0"
