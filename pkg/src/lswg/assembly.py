"""Global numbering, Cauchy data on Gamma_1 and the least-squares system."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import PolytopalMesh
from .polyspace import CellBasis, dim_p, project_edge
from .quadrature import cell_rule
from .weakops import LocalWeakOperators, local_operators


class GlobalDofMap:
    """Block numbering: cell interiors, then edge traces, then edge fluxes."""

    def __init__(self, mesh: PolytopalMesh, k: int):
        if k < 1:
            raise ValueError("polynomial degree k must be >= 1")
        self.mesh = mesh
        self.k = k
        self.n_interior = dim_p(k)
        self.trace_offset = mesh.n_cells * self.n_interior
        self.flux_offset = self.trace_offset + mesh.n_edges * (k + 1)
        self.n_dofs = self.flux_offset + mesh.n_edges * k

    def cell_dofs(self, ic: int) -> np.ndarray:
        return ic * self.n_interior + np.arange(self.n_interior)

    def trace_dofs(self, ie: int) -> np.ndarray:
        return self.trace_offset + ie * (self.k + 1) + np.arange(self.k + 1)

    def flux_dofs(self, ie: int) -> np.ndarray:
        return self.flux_offset + ie * self.k + np.arange(self.k)

    def local_to_global(self, ic: int) -> np.ndarray:
        """Global indices in the local order used by ``weakops``."""
        edges = self.mesh.cell_edges[ic]
        parts = [self.cell_dofs(ic)]
        parts += [self.trace_dofs(ie) for ie in edges]
        parts += [self.flux_dofs(ie) for ie in edges]
        return np.concatenate(parts)

    @cached_property
    def constrained(self) -> np.ndarray:
        g1 = self.mesh.gamma1_edges()
        if len(g1) == 0:
            return np.zeros(0, dtype=np.int64)
        idx = [np.concatenate([self.trace_dofs(ie), self.flux_dofs(ie)]) for ie in g1]
        return np.sort(np.concatenate(idx))

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)


def build_dof_map(mesh: PolytopalMesh, k: int) -> GlobalDofMap:
    return GlobalDofMap(mesh, k)


class WGSpace:
    """Weak Galerkin space on a mesh with cached element matrices."""

    def __init__(self, mesh: PolytopalMesh, k: int):
        self.mesh = mesh
        self.k = k
        self.dofs = build_dof_map(mesh, k)
        self.geoms = [mesh.cell_geometry(ic) for ic in range(mesh.n_cells)]
        self.ops: list[LocalWeakOperators] = [local_operators(g, k) for g in self.geoms]
        self.l2g = [self.dofs.local_to_global(ic) for ic in range(mesh.n_cells)]
        self._rules = {}

    @property
    def n_dofs(self) -> int:
        return self.dofs.n_dofs

    def cell_rule(self, ic: int, degree: int):
        key = (ic, degree)
        if key not in self._rules:
            self._rules[key] = cell_rule(self.geoms[ic].vertices, degree)
        return self._rules[key]

    def interior_basis(self, ic: int) -> CellBasis:
        return CellBasis.for_cell(self.k, self.geoms[ic])

    def test_basis(self, ic: int) -> CellBasis:
        return CellBasis.for_cell(self.k - 1, self.geoms[ic])

    def cell_b(self, b, ic: int):
        b = np.asarray(b, dtype=float)
        return b if b.ndim == 1 else b[ic]


@dataclass
class SparseSpdSystem:
    A: sp.csr_matrix  # free x free
    F: np.ndarray
    free: np.ndarray
    constrained: np.ndarray
    values: np.ndarray  # prescribed values on ``constrained``
    n_dofs: int

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.n_dofs)
        x[self.free] = x_free
        x[self.constrained] = self.values
        return x


def interpolate_cauchy_data(g1, g2, space: WGSpace) -> np.ndarray:
    """Prescribed values of the constrained DOFs, ordered as ``dofs.constrained``.

    ``g1(x, y)`` is the Dirichlet datum, ``g2(x, y)`` the outward normal
    derivative; boundary edge normals are outward so no sign flip occurs.
    """
    mesh, dm = space.mesh, space.dofs
    full = np.zeros(dm.n_dofs)
    for ie in mesh.gamma1_edges():
        p0 = mesh.vertices[mesh.edges[ie, 0]]
        p1 = mesh.vertices[mesh.edges[ie, 1]]
        full[dm.trace_dofs(ie)] = project_edge(g1, space.k, p0, p1)
        full[dm.flux_dofs(ie)] = project_edge(g2, space.k - 1, p0, p1)
    return full[dm.constrained]


def _symmetric_csr(rows, cols, vals, n) -> sp.csr_matrix:
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    # fl(a + b) == fl(b + a), so this is bitwise symmetric
    A = ((A + A.T) * 0.5).tocsr()
    A.sort_indices()
    return A


def global_matrix(space: WGSpace, eps: float, b) -> sp.csr_matrix:
    """Full N x N matrix of a(., .) without any boundary elimination."""
    rows, cols, vals = [], [], []
    for ic, ops in enumerate(space.ops):
        K = ops.local_matrix(eps, space.cell_b(b, ic))
        g = space.l2g[ic]
        rows.append(np.repeat(g, len(g)))
        cols.append(np.tile(g, len(g)))
        vals.append(K.ravel())
    return _symmetric_csr(np.concatenate(rows), np.concatenate(cols),
                          np.concatenate(vals), space.n_dofs)


def load_vector(space: WGSpace, eps: float, b, f, quad_degree: int | None = None) -> np.ndarray:
    """sum_T (f, -eps lap_w v + b . grad_w v)_T for every basis function v."""
    deg = quad_degree if quad_degree is not None else 2 * space.k + 4
    F = np.zeros(space.n_dofs)
    for ic, ops in enumerate(space.ops):
        rule = space.cell_rule(ic, deg)
        fv = np.broadcast_to(np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float),
                             rule.weights.shape)
        moments = space.test_basis(ic).values(rule.points).T @ (rule.weights * fv)
        R = ops.residual(eps, space.cell_b(b, ic))
        np.add.at(F, space.l2g[ic], R.T @ moments)
    return F


def assemble(space: WGSpace, eps: float, b, f, g1=None, g2=None,
             quad_degree: int | None = None) -> SparseSpdSystem:
    """Least-squares WG system on the free DOFs.

    Cauchy data are imposed by symmetric elimination: constrained columns are
    moved to the right-hand side and their rows/columns dropped.
    """
    if not eps > 0:
        raise ValueError(f"diffusion coefficient must be positive, got {eps}")
    dm = space.dofs
    if len(dm.free) == 0:
        raise ValueError("every degree of freedom is constrained; nothing to solve")
    zero = lambda x, y: np.zeros_like(x)  # noqa: E731
    values = interpolate_cauchy_data(g1 or zero, g2 or zero, space)
    A_full = global_matrix(space, eps, b)
    F_full = load_vector(space, eps, b, f, quad_degree)
    free, con = dm.free, dm.constrained
    A = A_full[free][:, free].tocsr()
    A.sort_indices()
    F = F_full[free] - A_full[free][:, con] @ values
    return SparseSpdSystem(A=A, F=F, free=free, constrained=con, values=values,
                           n_dofs=dm.n_dofs)


def bilinear_form(space: WGSpace, u: np.ndarray, v: np.ndarray, eps: float, b) -> float:
    total = 0.0
    for ic, ops in enumerate(space.ops):
        g = space.l2g[ic]
        R = ops.residual(eps, space.cell_b(b, ic))
        ru, rv = R @ u[g], R @ v[g]
        total += ru @ ops.M @ rv + u[g] @ ops.S @ v[g]
    return float(total)


def stabilizer_form(space: WGSpace, u: np.ndarray, v: np.ndarray) -> float:
    return float(sum(u[g] @ ops.S @ v[g] for g, ops in zip(space.l2g, space.ops)))


def energy_norm(space: WGSpace, v: np.ndarray, b, eps_norm: float = 1.0) -> float:
    """sqrt(a(v, v)) with the diffusion coefficient replaced by ``eps_norm``.

    Accumulated as a sum of squares so that near-kernel vectors give
    near-zero norms instead of sqrt(round-off).
    """
    total = 0.0
    for ic, ops in enumerate(space.ops):
        vg = v[space.l2g[ic]]
        r = ops.residual(eps_norm, space.cell_b(b, ic)) @ vg
        z = ops.Z @ vg
        total += max(r @ ops.M @ r, 0.0) + z @ z
    return float(np.sqrt(total))


def least_squares_functional(space: WGSpace, v: np.ndarray, eps: float, b, f,
                             quad_degree: int | None = None) -> float:
    """sum_T ||-eps lap_w v + b . grad_w v - Q^{k-1} f||_T^2 + s(v, v)."""
    deg = quad_degree if quad_degree is not None else 2 * space.k + 4
    total = 0.0
    for ic, ops in enumerate(space.ops):
        g = space.l2g[ic]
        rule = space.cell_rule(ic, deg)
        fv = np.broadcast_to(np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float),
                             rule.weights.shape)
        moments = space.test_basis(ic).values(rule.points).T @ (rule.weights * fv)
        qf = np.linalg.solve(ops.M, moments)
        r = ops.residual(eps, space.cell_b(b, ic)) @ v[g] - qf
        z = ops.Z @ v[g]
        total += r @ ops.M @ r + z @ z
    return float(total)


def dump_matrix(A: sp.spmatrix, path) -> None:
    """Coordinate text dump: header 'N nnz' then one 'i j value' per line."""
    C = A.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{C.shape[0]} {C.nnz}\n")
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{i} {j} {v:.17g}\n")
