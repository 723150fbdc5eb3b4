"""Error norms, observed convergence orders, field sampling and CSV output."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .assembly import WGSpace, energy_norm


@dataclass(frozen=True)
class ErrorRecord:
    level: int
    h: float
    l2: float
    energy: float
    l2_order: Optional[float] = None
    energy_order: Optional[float] = None
    n_dofs: int = 0


def l2_error(space: WGSpace, x: np.ndarray, u, quad_degree: Optional[int] = None) -> float:
    """sqrt(sum_T int_T (u - u0)^2)."""
    deg = quad_degree if quad_degree is not None else 2 * space.k + 4
    total = 0.0
    for ic in range(space.mesh.n_cells):
        rule = space.cell_rule(ic, deg)
        uh = space.interior_basis(ic).values(rule.points) @ x[space.dofs.cell_dofs(ic)]
        d = u(rule.points[:, 0], rule.points[:, 1]) - uh
        total += float(rule.weights @ (d * d))
    return math.sqrt(total)


def energy_error(space: WGSpace, x: np.ndarray, qhu: np.ndarray, b, eps_norm: float = 1.0) -> float:
    """|||Q_h u - u_h||| in the reporting norm (diffusion coefficient 1, b kept)."""
    return energy_norm(space, qhu - x, b, eps_norm)


def observed_order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def convergence_orders(records: Sequence[ErrorRecord]) -> list[ErrorRecord]:
    if len(records) < 2:
        raise ValueError("need at least two records to estimate orders")
    hs = [r.h for r in records]
    if any(h1 >= h0 for h0, h1 in zip(hs, hs[1:])):
        raise ValueError(f"mesh sizes must decrease strictly, got {hs}")
    out = [replace(records[0], l2_order=None, energy_order=None)]
    for prev, cur in zip(records, records[1:]):
        out.append(replace(
            cur,
            l2_order=_safe_order(prev.l2, cur.l2, prev.h, cur.h),
            energy_order=_safe_order(prev.energy, cur.energy, prev.h, cur.h),
        ))
    return out


def _safe_order(e0, e1, h0, h1):
    if e0 <= 0 or e1 <= 0:
        return None
    return observed_order(e0, e1, h0, h1)


def fortran_sci(v: float) -> str:
    """0.141E-01 style: mantissa in [0.1, 1)."""
    if v == 0 or not math.isfinite(v):
        return f"{v:.3E}"
    e = math.floor(math.log10(abs(v))) + 1
    m = v / 10.0**e
    if abs(round(m, 3)) >= 1.0:
        m /= 10.0
        e += 1
    return f"{m:.3f}E{e:+03d}"


def format_table(records: Sequence[ErrorRecord], title: str = "") -> str:
    def order(o):
        return "   " if o is None else f"{o:4.1f}"

    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'G_i':>4} | {'||u-u_h||_0':>12} {'O(h^r)':>6} | {'|||u-u_h|||_1':>13} {'O(h^r)':>6}")
    lines.append("-" * len(lines[-1]))
    for r in records:
        lines.append(f"{r.level:>4} | {fortran_sci(r.l2):>12} {order(r.l2_order):>6} | "
                     f"{fortran_sci(r.energy):>13} {order(r.energy_order):>6}")
    return "\n".join(lines)


def write_error_csv(records: Sequence[ErrorRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "h", "l2", "l2_order", "energy", "energy_order"])
        for r in records:
            w.writerow([r.level, repr(r.h), repr(r.l2),
                        "" if r.l2_order is None else repr(r.l2_order),
                        repr(r.energy),
                        "" if r.energy_order is None else repr(r.energy_order)])


# -- field sampling -----------------------------------------------------------

def _inside(poly: np.ndarray, pts: np.ndarray, tol: float) -> np.ndarray:
    """Even-odd test, plus points within ``tol`` of the boundary."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    near = np.zeros(len(pts), dtype=bool)
    m = len(poly)
    for i in range(m):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % m]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xc)
        dx, dy = x1 - x0, y1 - y0
        t = np.clip(((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        near |= np.hypot(x - x0 - t * dx, y - y0 - t * dy) <= tol
    return inside | near


def locate_points(mesh, pts: np.ndarray, tol: float = 1e-12):
    """Containing cell of each point and a flag for points clamped to the nearest cell."""
    owner = np.full(len(pts), -1, dtype=np.int64)
    for ic, c in enumerate(mesh.cells):
        poly = mesh.vertices[c]
        lo, hi = poly.min(axis=0) - tol, poly.max(axis=0) + tol
        cand = np.flatnonzero((owner < 0) & np.all((pts >= lo) & (pts <= hi), axis=1))
        if len(cand):
            hit = _inside(poly, pts[cand], tol)
            owner[cand[hit]] = ic
    flagged = owner < 0
    if flagged.any():
        d = np.linalg.norm(pts[flagged, None, :] - mesh.cell_centroids[None, :, :], axis=-1)
        owner[flagged] = d.argmin(axis=1)
    return owner, flagged


def sample_field(space: WGSpace, x: np.ndarray, resolution: int):
    """Evaluate u0 on a uniform resolution x resolution lattice of the unit square.

    Returns (points, values, flagged).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    g = np.linspace(0.0, 1.0, resolution)
    X, Y = np.meshgrid(g, g, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    owner, flagged = locate_points(space.mesh, pts)
    vals = np.empty(len(pts))
    for ic in np.unique(owner):
        sel = owner == ic
        vals[sel] = space.interior_basis(ic).values(pts[sel]) @ x[space.dofs.cell_dofs(ic)]
    return pts, vals, flagged


def write_field_csv(pts: np.ndarray, vals: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u"])
        for (px, py), v in zip(pts, vals):
            w.writerow([repr(float(px)), repr(float(py)), repr(float(v))])
