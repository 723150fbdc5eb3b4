"""Scaled monomial bases on cells and edges, Gram matrices, L2 projections."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .quadrature import QuadRule, cell_rule, edge_rule


class ProjectionError(ArithmeticError):
    """Gram matrix could not be factorized (degenerate cell or edge)."""


def dim_p(k: int) -> int:
    """Dimension of P_k in two variables; 0 for k < 0."""
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@lru_cache(maxsize=None)
def exponents(k: int) -> np.ndarray:
    """Graded lexicographic exponent pairs (a, b) with a+b <= k."""
    out = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def monomial_index(a: int, b: int) -> int:
    d = a + b
    return dim_p(d - 1) + b


class CellBasis:
    """phi_i(x, y) = ((x - xc)/h)^a ((y - yc)/h)^b in graded lex order."""

    def __init__(self, degree: int, center=(0.0, 0.0), scale: float = 1.0):
        self.degree = degree
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.exps = exponents(degree)

    @classmethod
    def for_cell(cls, degree: int, geom) -> "CellBasis":
        return cls(degree, geom.centroid, geom.diameter)

    @property
    def dim(self) -> int:
        return len(self.exps)

    def _powers(self, pts, extra=0):
        pts = np.atleast_2d(pts)
        X = (pts[:, 0] - self.center[0]) / self.scale
        Y = (pts[:, 1] - self.center[1]) / self.scale
        top = self.degree + 1 + extra
        PX = X[:, None] ** np.arange(top)
        PY = Y[:, None] ** np.arange(top)
        return PX, PY

    def values(self, pts) -> np.ndarray:
        """(npts, dim)."""
        PX, PY = self._powers(pts)
        a, b = self.exps[:, 0], self.exps[:, 1]
        return PX[:, a] * PY[:, b]

    def gradients(self, pts) -> np.ndarray:
        """(npts, dim, 2)."""
        PX, PY = self._powers(pts)
        a, b = self.exps[:, 0], self.exps[:, 1]
        am, bm = np.maximum(a - 1, 0), np.maximum(b - 1, 0)
        gx = a * PX[:, am] * PY[:, b] / self.scale
        gy = b * PX[:, a] * PY[:, bm] / self.scale
        return np.stack([gx, gy], axis=-1)

    def laplacians(self, pts) -> np.ndarray:
        """(npts, dim)."""
        PX, PY = self._powers(pts)
        a, b = self.exps[:, 0], self.exps[:, 1]
        a2, b2 = np.maximum(a - 2, 0), np.maximum(b - 2, 0)
        lx = a * (a - 1) * PX[:, a2] * PY[:, b]
        ly = b * (b - 1) * PX[:, a] * PY[:, b2]
        return (lx + ly) / self.scale**2

    def evaluate(self, coeffs, pts) -> np.ndarray:
        return self.values(pts) @ np.asarray(coeffs)


class EdgeBasis:
    """chi_j(s) = (s - 1/2)^j with s in [0, 1] from the lower-indexed endpoint."""

    def __init__(self, degree: int):
        self.degree = degree

    @property
    def dim(self) -> int:
        return self.degree + 1

    def values(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return (s[:, None] - 0.5) ** np.arange(self.degree + 1)

    def evaluate(self, coeffs, s) -> np.ndarray:
        return self.values(s) @ np.asarray(coeffs)


def mass_matrix(basis, rule: QuadRule) -> np.ndarray:
    """Gram matrix int phi_i phi_j for a CellBasis (points) or EdgeBasis (params)."""
    if rule.degree < 2 * basis.degree:
        raise ValueError(f"quadrature degree {rule.degree} too low for P{basis.degree} mass matrix")
    if isinstance(basis, EdgeBasis):
        V = basis.values(rule.params)
    else:
        V = basis.values(rule.points)
    M = (V * rule.weights[:, None]).T @ V
    return 0.5 * (M + M.T)


def gram_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        fac = cho_factor(M)
    except LinAlgError as exc:
        raise ProjectionError("Gram matrix is not positive definite") from exc
    return cho_solve(fac, rhs)


def project_cell(f, k: int, geom, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f(x, y)`` onto P_k(cell).

    ``geom`` is a CellGeometry; the basis is scaled about its centroid.
    """
    basis = CellBasis.for_cell(k, geom)
    rule = cell_rule(geom.vertices, quad_degree if quad_degree is not None else 2 * k + 4)
    V = basis.values(rule.points)
    fv = np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    fv = np.broadcast_to(fv, rule.weights.shape)
    M = (V * rule.weights[:, None]).T @ V
    return gram_solve(0.5 * (M + M.T), V.T @ (rule.weights * fv))


def project_edge(f, degree: int, p0, p1, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f(x, y)`` onto P_degree(edge).

    The edge is parametrized from ``p0`` to ``p1``.
    """
    basis = EdgeBasis(degree)
    rule = edge_rule(p0, p1, quad_degree if quad_degree is not None else 2 * degree + 4)
    V = basis.values(rule.params)
    fv = np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    fv = np.broadcast_to(fv, rule.weights.shape)
    M = (V * rule.weights[:, None]).T @ V
    return gram_solve(0.5 * (M + M.T), V.T @ (rule.weights * fv))


def project_exact_solution(u, grad_u, mesh, k: int, layout=None) -> np.ndarray:
    """Global coefficient vector of Q_h u = {Q0 u, Qb u, Qn(grad u . n)}.

    ``grad_u(x, y)`` returns the pair (u_x, u_y). Flux coefficients use each
    edge's stored global normal.
    """
    from .assembly import build_dof_map

    dm = layout or build_dof_map(mesh, k)
    out = np.zeros(dm.n_dofs)
    for ic in range(mesh.n_cells):
        out[dm.cell_dofs(ic)] = project_cell(u, k, mesh.cell_geometry(ic))
    for ie in range(mesh.n_edges):
        p0 = mesh.vertices[mesh.edges[ie, 0]]
        p1 = mesh.vertices[mesh.edges[ie, 1]]
        n = mesh.edge_normals[ie]

        def flux(x, y, n=n):
            gx, gy = grad_u(x, y)
            return gx * n[0] + gy * n[1]

        out[dm.trace_dofs(ie)] = project_edge(u, k, p0, p1)
        if k > 0:
            out[dm.flux_dofs(ie)] = project_edge(flux, k - 1, p0, p1)
    return out
