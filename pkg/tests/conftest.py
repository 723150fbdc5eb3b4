from fractions import Fraction
from math import comb

import numpy as np
import pytest

from lswg.mesh import CellGeometry, grid_family
from lswg.polyspace import CellBasis, EdgeBasis, exponents

UNIT_TRIANGLE = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
PENTAGON = [(0.0, 0.0), (0.25, 0.75), (0.75, 0.25), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def unit_triangle():
    return CellGeometry.from_polygon(UNIT_TRIANGLE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def meshes():
    cache = {}

    def get(family, level):
        if (family, level) not in cache:
            cache[family, level] = grid_family(family, level)
        return cache[family, level]

    return get


def fit_cell(f, k, geom, n=60, seed=0):
    """Coefficients of a polynomial f in P_k(cell) by least-squares fit at random points.

    Exact (to round-off) for f in P_k; independent of any quadrature rule.
    """
    rng = np.random.default_rng(seed)
    lo, hi = geom.vertices.min(axis=0), geom.vertices.max(axis=0)
    pts = lo + rng.random((n, 2)) * (hi - lo)
    V = CellBasis.for_cell(k, geom).values(pts)
    return np.linalg.lstsq(V, f(pts[:, 0], pts[:, 1]), rcond=None)[0]


def fit_edge(f, degree, p0, p1, n=20):
    s = np.linspace(0.0, 1.0, n)
    pts = np.asarray(p0)[None, :] + s[:, None] * (np.asarray(p1) - np.asarray(p0))[None, :]
    V = EdgeBasis(degree).values(s)
    return np.linalg.lstsq(V, f(pts[:, 0], pts[:, 1]), rcond=None)[0]


def local_qh(geom, k, w, grad_w):
    """Local WG coefficients of Q_h w for polynomial w of degree <= k (fit-based oracle)."""
    parts = [fit_cell(w, k, geom)]
    m = geom.n_edges
    traces, fluxes = [], []
    normals = geom.outward_normals()
    for j in range(m):
        p0, p1 = geom.edge_start[j], geom.edge_end[j]
        traces.append(fit_edge(w, k, p0, p1))
        n_glob = geom.sigma[j] * normals[j]

        def flux(x, y, n=n_glob):
            gx, gy = grad_w(x, y)
            return gx * n[0] + gy * n[1]

        fluxes.append(fit_edge(flux, k - 1, p0, p1))
    return np.concatenate(parts + traces + fluxes)


def monomial(a, b):
    def w(x, y):
        return x**a * y**b + 0.0 * x

    def grad(x, y):
        gx = a * x ** max(a - 1, 0) * y**b if a else 0.0 * x
        gy = b * x**a * y ** max(b - 1, 0) if b else 0.0 * y
        return gx + 0.0 * x, gy + 0.0 * y

    def lap(x, y):
        out = 0.0 * x
        if a >= 2:
            out = out + a * (a - 1) * x ** (a - 2) * y**b
        if b >= 2:
            out = out + b * (b - 1) * x**a * y ** (b - 2)
        return out

    return w, grad, lap


# -- exact rational oracle ------------------------------------------------------
# Polynomials are {(a, b): Fraction} dicts; geometry doubles are taken as exact
# rationals, so the only error is the final rounding of each coefficient.

def _diff(poly, d):
    out = {}
    for (a, b), c in poly.items():
        e = (a, b)[d]
        if e:
            key = (a - (d == 0), b - (d == 1))
            out[key] = out.get(key, 0) + c * e
    return out


def _add(*polys):
    out = {}
    for p in polys:
        for key, c in p.items():
            out[key] = out.get(key, 0) + c
    return out


def _scale(poly, s):
    return {key: c * Fraction(s) for key, c in poly.items()}


def exact_cell_coeffs(poly, geom, degree):
    """Correctly rounded coefficients of poly in the scaled monomial basis of the cell."""
    xc, yc = map(Fraction, geom.centroid)
    h = Fraction(geom.diameter)
    out = {}
    for (a, b), c in poly.items():
        for i in range(a + 1):
            for j in range(b + 1):
                out[i, j] = out.get((i, j), 0) + (c * comb(a, i) * comb(b, j)
                                                  * xc ** (a - i) * yc ** (b - j) * h ** (i + j))
    return np.array([float(out.get((int(i), int(j)), 0)) for i, j in exponents(degree)])


def exact_edge_coeffs(poly, p0, p1, degree):
    """Coefficients in (s - 1/2)^j along p0 -> p1."""
    m = [(Fraction(p0[d]) + Fraction(p1[d])) / 2 for d in range(2)]
    t = [Fraction(p1[d]) - Fraction(p0[d]) for d in range(2)]
    out = [Fraction(0)] * (degree + 1)
    for (a, b), c in poly.items():
        for i in range(a + 1):
            for j in range(b + 1):
                out[i + j] += (c * comb(a, i) * comb(b, j)
                               * m[0] ** (a - i) * t[0] ** i * m[1] ** (b - j) * t[1] ** j)
    return np.array([float(x) for x in out])


def exact_monomial_data(geom, k, a, b):
    """(Q_h w, grad w coefficients, lap w coefficients) for w = x^a y^b, exactly rounded."""
    w = {(a, b): Fraction(1)}
    gx, gy = _diff(w, 0), _diff(w, 1)
    lap = _add(_diff(gx, 0), _diff(gy, 1))
    normals = geom.outward_normals()
    traces, fluxes = [], []
    for j in range(geom.n_edges):
        p0, p1 = geom.edge_start[j], geom.edge_end[j]
        n = geom.sigma[j] * normals[j]
        traces.append(exact_edge_coeffs(w, p0, p1, k))
        fluxes.append(exact_edge_coeffs(_add(_scale(gx, n[0]), _scale(gy, n[1])), p0, p1, k - 1))
    v = np.concatenate([exact_cell_coeffs(w, geom, k)] + traces + fluxes)
    grad = np.r_[exact_cell_coeffs(gx, geom, k - 1), exact_cell_coeffs(gy, geom, k - 1)]
    return v, grad, exact_cell_coeffs(lap, geom, k - 1)


# -- acceptance reporting ------------------------------------------------------

_VERDICTS: dict = {}


@pytest.fixture(scope="session")
def verdict():
    """Record (criterion, case, ok, detail); summarized as one PASS/FAIL line per criterion."""

    def record(criterion, ok, detail="", case=None):
        _VERDICTS.setdefault(criterion, []).append((case, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion, rows in _VERDICTS.items():
        ok = all(r[1] for r in rows)
        failed = [r for r in rows if not r[1]]
        head = f"{'PASS' if ok else 'FAIL'}  {criterion}"
        if len(rows) > 1:
            head += f"  ({len(rows) - len(failed)}/{len(rows)} cases)"
        elif rows[0][2]:
            head += f"  {rows[0][2]}"
        tr.write_line(head)
        if len(rows) > 1:
            for case, good, detail in rows:
                tr.write_line(f"      {'ok  ' if good else 'FAIL'} {case}: {detail}")
