"""Least-squares weak Galerkin finite elements for Cauchy problems of
convection-diffusion equations on polygonal meshes."""

from .assembly import (GlobalDofMap, SparseSpdSystem, WGSpace, assemble, bilinear_form,
                       build_dof_map, energy_norm, interpolate_cauchy_data)
from .mesh import (BoundarySpec, PolytopalMesh, build_nonconvex_pentagon, build_triangular,
                   grid_family, load_mesh, save_mesh)
from .solver import cg_solve, direct_solve
from .study import StudyConfig, parse_config, run_study

__version__ = "0.1.0"
