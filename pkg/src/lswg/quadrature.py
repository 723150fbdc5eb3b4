"""Quadrature on edges (Gauss-Legendre) and on simple polygons.

Polygons are ear-clipped into triangles; every triangle carries a collapsed
(Stroud conical product) Gauss rule, which has positive weights at every
degree.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import roots_jacobi

from .mesh import signed_area


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,)
    degree: int
    params: Optional[np.ndarray] = None  # arclength parameter in [0, 1] for edge rules

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def integrate(f, rule: QuadRule) -> float:
    """Sum of w_i f(p_i); ``f`` takes arrays (x, y) and is broadcast."""
    vals = np.broadcast_to(np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float),
                           rule.weights.shape)
    return float(np.dot(rule.weights, vals))


@lru_cache(maxsize=None)
def gauss_legendre_01(npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _reference_triangle(degree: int):
    n = max(1, (degree + 2) // 2)
    t, wj = roots_jacobi(n, 1.0, 0.0)
    xi = 0.5 * (t + 1.0)
    wj = wj / 4.0
    eta, wl = gauss_legendre_01(n)
    X = np.repeat(xi, n)
    Y = np.outer(1.0 - xi, eta).ravel()
    W = np.outer(wj, wl).ravel()
    # barycentric weights of vertices (0,0), (1,0), (0,1)
    bary = np.column_stack([1.0 - X - Y, X, Y])
    return bary, W


def edge_rule(p0, p1, degree: int) -> QuadRule:
    """Gauss rule on the segment p0 -> p1, exact to ``degree`` in arclength."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    if length == 0.0:
        raise ValueError("zero-length edge")
    s, w = gauss_legendre_01((degree + 2) // 2)
    pts = p0[None, :] + s[:, None] * (p1 - p0)[None, :]
    return QuadRule(pts, w * length, degree, params=s)


def triangle_rule(tri, degree: int) -> QuadRule:
    tri = np.asarray(tri, dtype=float)
    bary, w = _reference_triangle(degree)
    area2 = abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
    return QuadRule(bary @ tri, w * area2, degree)


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1, d2 = orient(c, d, a), orient(c, d, b)
    d3, d4 = orient(a, b, c), orient(a, b, d)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(poly: np.ndarray) -> bool:
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(a, b, poly[j], poly[(j + 1) % m]):
                return False
    return True


def _point_in_triangle(p, a, b, c) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    return cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0


def ear_clip(poly) -> list[tuple[int, int, int]]:
    """Triangulate a simple polygon; returns index triples into ``poly``.

    Orientation of the input is normalized to counter-clockwise.
    """
    poly = np.asarray(poly, dtype=float)
    m = len(poly)
    if m < 3:
        raise GeometryError("polygon needs at least three vertices")
    if not is_simple(poly):
        raise GeometryError("polygon is self-intersecting")
    idx = list(range(m))
    if signed_area(poly) < 0:
        idx.reverse()
    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        clipped = False
        for i in range(n):
            ia, ib, ic = idx[i - 1], idx[i], idx[(i + 1) % n]
            a, b, c = poly[ia], poly[ib], poly[ic]
            cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cr <= 0:
                continue
            if any(_point_in_triangle(poly[j], a, b, c)
                   for j in idx if j not in (ia, ib, ic)):
                continue
            tris.append((ia, ib, ic))
            idx.pop(i)
            clipped = True
            break
        if not clipped:
            # only collinear runs left; drop a flat vertex
            guard += 1
            if guard > m:
                raise GeometryError("ear clipping failed; polygon is degenerate")
            tris.append((idx[-1], idx[0], idx[1]))
            idx.pop(0)
    tris.append(tuple(idx))
    return tris


def cell_rule(poly, degree: int) -> QuadRule:
    """Composite rule on a simple polygon, exact for polynomials of ``degree``."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    poly = np.asarray(poly, dtype=float)
    pts, wts = [], []
    for tri in ear_clip(poly):
        r = triangle_rule(poly[list(tri)], degree)
        pts.append(r.points)
        wts.append(r.weights)
    return QuadRule(np.vstack(pts), np.concatenate(wts), degree)


def monomial_integral_exact(poly, a: int, b: int) -> float:
    """Exact integral of x^a y^b over a polygon by the divergence theorem.

    Uses  int_P x^a y^b = 1/(a+1) * oint x^(a+1) y^b n_x ds, evaluated edge by
    edge with a Gauss rule that is exact for the degree-(a+b+1) integrand.
    Works for either orientation (sign of the area is absorbed).
    """
    poly = np.asarray(poly, dtype=float)
    sgn = 1.0 if signed_area(poly) > 0 else -1.0
    s, w = gauss_legendre_01((a + b + 3) // 2)
    total = 0.0
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        x = p[0] + s * (q[0] - p[0])
        y = p[1] + s * (q[1] - p[1])
        # n_x ds = dy for a CCW boundary
        total += np.dot(w, x ** (a + 1) * y**b) * (q[1] - p[1])
    return sgn * total / (a + 1)
