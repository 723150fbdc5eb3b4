"""Element matrices for the discrete weak gradient, weak Laplacian and stabilizer.

Local degrees of freedom of a cell with m edges, for polynomial degree k:

    [v0: dim P_k(T)] ++ [vb on edge 0..m-1: k+1 each] ++ [vn on edge 0..m-1: k each]

``vn`` is the normal flux v_g.n in the edge's stored (global) normal
direction; the cell sees ``sigma_e * vn`` as its outward flux.
Weak derivatives are returned as coefficient vectors in the scaled monomial
basis of P_{k-1}(T).

The Gram matrix of that basis has condition number ~1e6 at k = 4, so
assembling it in double precision and solving already costs ~1e-9 in
the weak Laplacian.  The primal-form operators are therefore built from
exact polynomial moments in extended precision and rounded once.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .polyspace import CellBasis, EdgeBasis, ProjectionError, dim_p, exponents, gram_solve
from .quadrature import cell_rule, edge_rule


@dataclass(frozen=True)
class LocalDofLayout:
    k: int
    n_edges: int
    sigma: np.ndarray

    @property
    def n_interior(self) -> int:
        return dim_p(self.k)

    @property
    def n_local(self) -> int:
        return dim_p(self.k) + self.n_edges * (2 * self.k + 1)

    def interior(self) -> slice:
        return slice(0, self.n_interior)

    def trace(self, j: int) -> slice:
        start = self.n_interior + j * (self.k + 1)
        return slice(start, start + self.k + 1)

    def flux(self, j: int) -> slice:
        start = self.n_interior + self.n_edges * (self.k + 1) + j * self.k
        return slice(start, start + self.k)


@dataclass
class LocalWeakOperators:
    """Element matrices of one cell.

    G   (2*nq, nloc)  weak gradient, x-components then y-components
    L   (nq, nloc)    weak Laplacian
    S   (nloc, nloc)  stabilizer
    M   (nq, nq)      Gram matrix of P_{k-1}(T)
    Z   (nrows, nloc) square-root factor, S = Z^T Z
    """

    layout: LocalDofLayout
    G: np.ndarray
    L: np.ndarray
    S: np.ndarray
    M: np.ndarray
    Z: Optional[np.ndarray] = None

    @property
    def Gx(self) -> np.ndarray:
        return self.G[: len(self.M)]

    @property
    def Gy(self) -> np.ndarray:
        return self.G[len(self.M):]

    def residual(self, eps: float, b) -> np.ndarray:
        return residual_operator(self, self.layout.k, eps, b)

    def local_matrix(self, eps: float, b) -> np.ndarray:
        R = self.residual(eps, b)
        K = R.T @ self.M @ R + self.S
        return 0.5 * (K + K.T)


class _CellData:
    """Quadrature and basis tables shared by all element matrices of a cell."""

    def __init__(self, geom, k: int):
        if k < 1:
            raise ValueError("polynomial degree k must be >= 1")
        self.geom = geom
        self.k = k
        self.layout = LocalDofLayout(k, geom.n_edges, np.asarray(geom.sigma, dtype=float))
        self.pk = CellBasis.for_cell(k, geom)
        self.pq = CellBasis.for_cell(k - 1, geom)
        self.rule = cell_rule(geom.vertices, 2 * k)
        normals = geom.outward_normals()
        self.edges = []
        for j in range(geom.n_edges):
            er = edge_rule(geom.edge_start[j], geom.edge_end[j], 2 * k)
            self.edges.append((er, normals[j], float(geom.sigma[j])))
        self._exact = None

    def exact(self):
        """(M, G, L) from extended-precision moments, computed once."""
        if self._exact is None:
            self._exact = _exact_operators(self.geom, self.k, self.layout)
        return self._exact

    def gram(self) -> np.ndarray:
        V = self.pq.values(self.rule.points)
        M = (V * self.rule.weights[:, None]).T @ V
        return 0.5 * (M + M.T)


_XP = np.longdouble


@lru_cache(maxsize=None)
def _gauss_legendre_xp(n: int):
    """Gauss-Legendre nodes/weights on [0, 1], Newton-polished in extended precision."""
    x = np.polynomial.legendre.leggauss(n)[0].astype(_XP)
    for _ in range(4):
        p0, p1 = np.ones_like(x), x.copy()
        for m in range(2, n + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        dp = n * (x * p1 - p0) / (x * x - 1)
        x = x - p1 / dp
    w = 2 / ((1 - x * x) * dp * dp)
    return (x + 1) / 2, w / 2


class _ExactTables:
    """Extended-precision moments of a cell in its scaled coordinates.

    ``mom[a, b]`` is the integral of X^a Y^b over the cell, X = (x - xc)/h,
    computed by the divergence theorem as exact edge integrals.
    """

    def __init__(self, geom, k: int):
        self.k = k
        self.h = _XP(geom.diameter)
        c = np.asarray(geom.centroid, dtype=_XP)
        V = (np.asarray(geom.vertices, dtype=_XP) - c) / self.h
        s, w = _gauss_legendre_xp(k + 1)
        top = 2 * k + 2
        mom = np.zeros((top, top), dtype=_XP)
        for i in range(len(V)):
            p, q = V[i], V[(i + 1) % len(V)]
            X = p[0] + s * (q[0] - p[0])
            Y = p[1] + s * (q[1] - p[1])
            PX = X[:, None] ** np.arange(top + 1)
            PY = Y[:, None] ** np.arange(top)
            for a in range(top - 1):
                for b in range(top - 1 - a):
                    mom[a, b] += (q[1] - p[1]) * (w @ (PX[:, a + 1] * PY[:, b])) / (a + 1)
        # physical measure: dx dy = h^2 dX dY
        self.mom = mom * self.h**2
        self.c = c
        self.s, self.w = s, w

    def edge_points(self, p0, p1):
        """Scaled coordinates and physical weights along p0 -> p1."""
        p0 = np.asarray(p0, dtype=_XP)
        t = np.asarray(p1, dtype=_XP) - p0
        length = np.sqrt(t @ t)
        X = (p0[0] + self.s * t[0] - self.c[0]) / self.h
        Y = (p0[1] + self.s * t[1] - self.c[1]) / self.h
        return X, Y, self.w * length, t / length


def _cholesky_solve_xp(M, B):
    n = len(M)
    Lc = np.zeros_like(M)
    for j in range(n):
        d = M[j, j] - Lc[j, :j] @ Lc[j, :j]
        if not d > 0:
            raise ProjectionError("Gram matrix is not positive definite")
        Lc[j, j] = np.sqrt(d)
        Lc[j + 1:, j] = (M[j + 1:, j] - Lc[j + 1:, :j] @ Lc[j, :j]) / Lc[j, j]
    Y = np.zeros_like(B)
    for j in range(n):
        Y[j] = (B[j] - Lc[j, :j] @ Y[:j]) / Lc[j, j]
    X = np.zeros_like(B)
    for j in reversed(range(n)):
        X[j] = (Y[j] - Lc[j + 1:, j] @ X[j + 1:]) / Lc[j, j]
    return X


def _exact_operators(geom, k: int, layout):
    """Gram matrix, weak gradient and weak Laplacian (primal forms), extended precision."""
    tab = _ExactTables(geom, k)
    mom, h = tab.mom, tab.h
    eq, ek = exponents(k - 1), exponents(k)
    nq, nloc = len(eq), layout.n_local
    aq, bq = eq[:, 0], eq[:, 1]
    ak, bk = ek[:, 0], ek[:, 1]
    M = mom[aq[:, None] + aq[None, :], bq[:, None] + bq[None, :]]
    Bx = np.zeros((nq, nloc), dtype=_XP)
    By = np.zeros((nq, nloc), dtype=_XP)
    BL = np.zeros((nq, nloc), dtype=_XP)
    inner = layout.interior()
    # -(v0, d psi/dx): d/dx X^a Y^b = a X^(a-1) Y^b / h
    Bx[:, inner] = -(aq[:, None] * mom[np.maximum(aq - 1, 0)[:, None] + ak[None, :],
                                        bq[:, None] + bk[None, :]]) / h
    By[:, inner] = -(bq[:, None] * mom[aq[:, None] + ak[None, :],
                                        np.maximum(bq - 1, 0)[:, None] + bk[None, :]]) / h
    lap_x = (aq * (aq - 1))[:, None] * mom[np.maximum(aq - 2, 0)[:, None] + ak[None, :],
                                            bq[:, None] + bk[None, :]]
    lap_y = (bq * (bq - 1))[:, None] * mom[aq[:, None] + ak[None, :],
                                            np.maximum(bq - 2, 0)[:, None] + bk[None, :]]
    BL[:, inner] = (lap_x + lap_y) / h**2
    V = np.asarray(geom.vertices)
    m = len(V)
    chi_k = (tab.s[:, None] - _XP(0.5)) ** np.arange(k + 1)
    chi_q = chi_k[:, :k]
    for j in range(m):
        _, _, _, tloc = tab.edge_points(V[j], V[(j + 1) % m])
        n = np.array([tloc[1], -tloc[0]])
        X, Y, w, tglob = tab.edge_points(geom.edge_start[j], geom.edge_end[j])
        sigma = _XP(layout.sigma[j])
        PX = X[:, None] ** np.arange(k)
        PY = Y[:, None] ** np.arange(k)
        q = PX[:, aq] * PY[:, bq]
        dqx = aq * PX[:, np.maximum(aq - 1, 0)] * PY[:, bq] / h
        dqy = bq * PX[:, aq] * PY[:, np.maximum(bq - 1, 0)] / h
        qw = q * w[:, None]
        Bx[:, layout.trace(j)] += n[0] * qw.T @ chi_k
        By[:, layout.trace(j)] += n[1] * qw.T @ chi_k
        dqn = (dqx * n[0] + dqy * n[1]) * w[:, None]
        BL[:, layout.trace(j)] -= dqn.T @ chi_k
        BL[:, layout.flux(j)] += sigma * qw.T @ chi_q
    G = np.vstack([_cholesky_solve_xp(M, Bx), _cholesky_solve_xp(M, By)])
    L = _cholesky_solve_xp(M, BL)
    return M.astype(float), G.astype(float), L.astype(float)


def _prepare(cell, k):
    return cell if isinstance(cell, _CellData) else _CellData(cell, k)


def weak_gradient_matrix(cell, k: int, form: str = "primal") -> np.ndarray:
    """Matrix of the discrete weak gradient into [P_{k-1}(T)]^2.

    ``form='primal'`` tests  -(v0, div psi) + <vb, psi.n>;
    ``form='ibp'`` tests the integrated-by-parts variant
    (grad v0, psi) - <v0 - vb, psi.n>, assembled in double precision
    with quadrature as an independent cross-check.
    """
    cd = _prepare(cell, k)
    if form == "primal":
        return cd.exact()[1]
    if form != "ibp":
        raise ValueError(f"unknown form {form!r}")
    lay, nq = cd.layout, cd.pq.dim
    B = np.zeros((2 * nq, lay.n_local))
    w = cd.rule.weights
    pts = cd.rule.points
    Vq = cd.pq.values(pts)
    gk = cd.pk.gradients(pts)
    for c in range(2):
        B[c * nq:(c + 1) * nq, lay.interior()] += (Vq * w[:, None]).T @ gk[:, :, c]
    eb = EdgeBasis(k)
    for j, (er, n, _) in enumerate(cd.edges):
        qv = cd.pq.values(er.points) * er.weights[:, None]
        chi = eb.values(er.params)
        for c in range(2):
            rows = slice(c * nq, (c + 1) * nq)
            B[rows, lay.trace(j)] += n[c] * qv.T @ chi
            B[rows, lay.interior()] -= n[c] * qv.T @ cd.pk.values(er.points)
    M = cd.gram()
    return np.vstack([gram_solve(M, B[:nq]), gram_solve(M, B[nq:])])


def weak_laplacian_matrix(cell, k: int, form: str = "primal") -> np.ndarray:
    """Matrix of the discrete weak Laplacian into P_{k-1}(T).

    ``form='primal'``: (v0, lap w) - <vb, grad w.n> + <vg.n, w>.
    ``form='ibp'``:    (lap v0, w) + <v0 - vb, grad w.n> + <(vg - grad v0).n, w>,
    in double precision with quadrature.
    """
    cd = _prepare(cell, k)
    if form == "primal":
        return cd.exact()[2]
    if form != "ibp":
        raise ValueError(f"unknown form {form!r}")
    lay, nq = cd.layout, cd.pq.dim
    B = np.zeros((nq, lay.n_local))
    w = cd.rule.weights
    pts = cd.rule.points
    B[:, lay.interior()] += (cd.pq.values(pts) * w[:, None]).T @ cd.pk.laplacians(pts)
    eb_k, eb_q = EdgeBasis(k), EdgeBasis(k - 1)
    for j, (er, n, sigma) in enumerate(cd.edges):
        ww = er.weights[:, None]
        dqn = cd.pq.gradients(er.points) @ n  # (npts, nq)
        qv = cd.pq.values(er.points)
        B[:, lay.trace(j)] -= (dqn * ww).T @ eb_k.values(er.params)
        B[:, lay.flux(j)] += sigma * (qv * ww).T @ eb_q.values(er.params)
        B[:, lay.interior()] += (dqn * ww).T @ cd.pk.values(er.points)
        B[:, lay.interior()] -= (qv * ww).T @ (cd.pk.gradients(er.points) @ n)
    return gram_solve(cd.gram(), B)


def stabilizer_factor(cell, k: int) -> np.ndarray:
    """Z with Z^T Z = S; rows are weighted jumps at the edge quadrature points.

    ||Z v||^2 evaluates v^T S v without cancellation when v is nearly in the kernel.
    """
    cd = _prepare(cell, k)
    lay = cd.layout
    h = cd.geom.diameter
    rows = []
    eb_k, eb_q = EdgeBasis(k), EdgeBasis(k - 1)
    for j, (er, n, sigma) in enumerate(cd.edges):
        npts = len(er.weights)
        jump = np.zeros((npts, lay.n_local))
        jump[:, lay.interior()] = cd.pk.values(er.points)
        jump[:, lay.trace(j)] = -eb_k.values(er.params)
        dflux = np.zeros((npts, lay.n_local))
        dflux[:, lay.interior()] = cd.pk.gradients(er.points) @ n
        dflux[:, lay.flux(j)] = -sigma * eb_q.values(er.params)
        sw = np.sqrt(er.weights)[:, None]
        rows += [h**-1.5 * sw * jump, h**-0.5 * sw * dflux]
    return np.vstack(rows)


def stabilizer_matrix(cell, k: int) -> np.ndarray:
    """h^-3 <v0 - vb, .>_{dT} + h^-1 <(grad v0 - vg).n, .>_{dT} as a matrix."""
    return _normal_matrix(stabilizer_factor(cell, k))


def _normal_matrix(Z):
    S = Z.T @ Z
    return 0.5 * (S + S.T)


def local_operators(cell, k: int) -> LocalWeakOperators:
    cd = _prepare(cell, k)
    Z = stabilizer_factor(cd, k)
    return LocalWeakOperators(
        layout=cd.layout,
        G=weak_gradient_matrix(cd, k),
        L=weak_laplacian_matrix(cd, k),
        S=_normal_matrix(Z),
        M=cd.exact()[0],
        Z=Z,
    )


def residual_operator(cell, k: int, eps: float, b) -> np.ndarray:
    """Matrix of  -eps * lap_w v + b . grad_w v  into P_{k-1}(T) coefficients.

    ``cell`` may be a CellGeometry or precomputed LocalWeakOperators.
    """
    if not eps > 0:
        raise ValueError(f"diffusion coefficient must be positive, got {eps}")
    ops = cell if isinstance(cell, LocalWeakOperators) else local_operators(cell, k)
    bx, by = b
    return -eps * ops.L + bx * ops.Gx + by * ops.Gy
