"""Polygonal meshes of the unit square.

Cells are stored as counter-clockwise vertex loops; edges, normals and
boundary tags are derived deterministically from the cell list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

INTERIOR = 0
GAMMA1 = 1
GAMMA2 = 2

_TAG_NAMES = {INTERIOR: "interior", GAMMA1: "gamma1", GAMMA2: "gamma2"}


class MeshError(ValueError):
    """Raised for invalid mesh input or a malformed mesh file."""


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(poly: np.ndarray) -> float:
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


def default_gamma1(midpoint: np.ndarray) -> bool:
    """Accessible boundary: the left side x=0 and the bottom side y=0."""
    x, y = midpoint
    return abs(x) < 1e-12 or abs(y) < 1e-12


@dataclass(frozen=True)
class BoundarySpec:
    gamma1: Callable[[np.ndarray], bool] = default_gamma1

    def tag(self, midpoint: np.ndarray) -> int:
        return GAMMA1 if self.gamma1(midpoint) else GAMMA2


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of one polygon as seen by the element routines.

    ``edge_start``/``edge_end`` give each local edge in its *global*
    parametrization direction (from the lower-indexed vertex), ``sigma[j]``
    is +1 when the stored edge normal is outward for this cell.
    Local edge ``j`` joins local vertices ``j`` and ``j+1``.
    """

    vertices: np.ndarray
    edge_start: np.ndarray
    edge_end: np.ndarray
    sigma: np.ndarray
    centroid: np.ndarray
    diameter: float
    area: float

    @property
    def n_edges(self) -> int:
        return len(self.vertices)

    def outward_normals(self) -> np.ndarray:
        v = self.vertices
        t = np.roll(v, -1, axis=0) - v
        length = np.hypot(t[:, 0], t[:, 1])
        return np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]

    def edge_lengths(self) -> np.ndarray:
        t = self.edge_end - self.edge_start
        return np.hypot(t[:, 0], t[:, 1])

    @classmethod
    def from_polygon(cls, vertices) -> "CellGeometry":
        """Stand-alone polygon; edges parametrized along the CCW loop."""
        v = np.asarray(vertices, dtype=float)
        if signed_area(v) <= 0:
            raise MeshError("polygon must be counter-clockwise")
        return cls(
            vertices=v,
            edge_start=v.copy(),
            edge_end=np.roll(v, -1, axis=0),
            sigma=np.ones(len(v)),
            centroid=polygon_centroid(v),
            diameter=polygon_diameter(v),
            area=signed_area(v),
        )


@dataclass
class PolytopalMesh:
    """2D polygonal mesh.

    Attributes derived in ``__post_init__``:

    edges          (ne, 2) vertex indices, lower index first
    edge_cells     (ne, 2) adjacent cells, second entry -1 on the boundary
    edge_normals   (ne, 2) unit normals; outward on the boundary, from the
                   lower-indexed to the higher-indexed cell inside
    edge_tags      (ne,) INTERIOR, GAMMA1 or GAMMA2
    cell_edges     per cell, global edge index of each local edge
    cell_sigma     per cell, +1/-1 orientation of each local edge normal
    """

    vertices: np.ndarray
    cells: list
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    boundary_tags: Optional[dict] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = [np.asarray(c, dtype=np.int64) for c in self.cells]
        nv = len(self.vertices)
        for ic, c in enumerate(self.cells):
            if len(c) < 3:
                raise MeshError(f"cell {ic} has fewer than 3 vertices")
            if c.min() < 0 or c.max() >= nv:
                raise MeshError(f"cell {ic} references a vertex out of range")
            if signed_area(self.vertices[c]) <= 0:
                raise MeshError(f"cell {ic} is not counter-clockwise")
        self._build_edges()

    def _build_edges(self):
        edge_index: dict[tuple[int, int], int] = {}
        edges, edge_cells = [], []
        self.cell_edges = []
        for ic, c in enumerate(self.cells):
            local = []
            for a, b in zip(c, np.roll(c, -1)):
                key = (int(min(a, b)), int(max(a, b)))
                ie = edge_index.get(key)
                if ie is None:
                    ie = len(edges)
                    edge_index[key] = ie
                    edges.append(key)
                    edge_cells.append([ic, -1])
                else:
                    if edge_cells[ie][1] != -1:
                        raise MeshError(f"edge {key} shared by more than two cells")
                    edge_cells[ie][1] = ic
                local.append(ie)
            self.cell_edges.append(np.array(local, dtype=np.int64))
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_cells = np.array(edge_cells, dtype=np.int64).reshape(-1, 2)
        # sort adjacent cells so that the normal points from lower to higher
        inner = self.edge_cells[:, 1] >= 0
        self.edge_cells[inner] = np.sort(self.edge_cells[inner], axis=1)

        p0 = self.vertices[self.edges[:, 0]]
        p1 = self.vertices[self.edges[:, 1]]
        t = p1 - p0
        self.edge_lengths = np.hypot(t[:, 0], t[:, 1])
        if np.any(self.edge_lengths == 0):
            raise MeshError("zero-length edge")
        normals = np.column_stack([t[:, 1], -t[:, 0]]) / self.edge_lengths[:, None]
        # orient as the outward normal of edge_cells[:, 0]
        self.cell_sigma = []
        owner = self.edge_cells[:, 0]
        for ic, c in enumerate(self.cells):
            out = _outward(self.vertices[c])
            for j, ie in enumerate(self.cell_edges[ic]):
                if owner[ie] == ic and np.dot(out[j], normals[ie]) < 0:
                    normals[ie] = -normals[ie]
        for ic, c in enumerate(self.cells):
            out = _outward(self.vertices[c])
            dots = np.einsum("ij,ij->i", out, normals[self.cell_edges[ic]])
            self.cell_sigma.append(np.where(dots > 0, 1.0, -1.0))
        self.edge_normals = normals
        self.edge_midpoints = 0.5 * (p0 + p1)

        tags = np.full(len(edges), INTERIOR, dtype=np.int64)
        for ie in np.flatnonzero(~inner):
            key = tuple(self.edges[ie])
            if self.boundary_tags is not None and key in self.boundary_tags:
                tags[ie] = self.boundary_tags[key]
            else:
                tags[ie] = self.boundary.tag(self.edge_midpoints[ie])
        self.edge_tags = tags

        self.cell_areas = np.array([signed_area(self.vertices[c]) for c in self.cells])
        self.cell_diameters = np.array([polygon_diameter(self.vertices[c]) for c in self.cells])
        self.cell_centroids = np.array([polygon_centroid(self.vertices[c]) for c in self.cells])

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    def gamma1_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == GAMMA1)

    def cell_geometry(self, ic: int) -> CellGeometry:
        c = self.cells[ic]
        ie = self.cell_edges[ic]
        return CellGeometry(
            vertices=self.vertices[c],
            edge_start=self.vertices[self.edges[ie, 0]],
            edge_end=self.vertices[self.edges[ie, 1]],
            sigma=self.cell_sigma[ic],
            centroid=self.cell_centroids[ic],
            diameter=float(self.cell_diameters[ic]),
            area=float(self.cell_areas[ic]),
        )

    def tag_name(self, ie: int) -> str:
        return _TAG_NAMES[int(self.edge_tags[ie])]


def _outward(poly: np.ndarray) -> np.ndarray:
    t = np.roll(poly, -1, axis=0) - poly
    length = np.hypot(t[:, 0], t[:, 1])
    return np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]


def _lattice_mesh(n: int, scale: int, loops, boundary: Optional[BoundarySpec]):
    """Build a mesh from per-square loops given in integer lattice units.

    ``loops`` holds CCW loops on the reference square [0, scale]^2; vertices
    are merged through their integer coordinates so that shared points are
    bit-identical.
    """
    index: dict[tuple[int, int], int] = {}
    coords = []
    cells = []
    for j in range(n):
        for i in range(n):
            for loop in loops:
                cell = []
                for a, b in loop:
                    key = (i * scale + a, j * scale + b)
                    iv = index.get(key)
                    if iv is None:
                        iv = len(coords)
                        index[key] = iv
                        coords.append(key)
                    cell.append(iv)
                cells.append(cell)
    vertices = np.array(coords, dtype=float) / (n * scale)
    return PolytopalMesh(vertices, cells, boundary or BoundarySpec())


def build_triangular(n: int, boundary: Optional[BoundarySpec] = None) -> PolytopalMesh:
    """n x n squares, each cut along the diagonal from lower-left to upper-right."""
    _check_n(n)
    loops = [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]]
    return _lattice_mesh(n, 1, loops, boundary)


def build_nonconvex_pentagon(n: int, boundary: Optional[BoundarySpec] = None) -> PolytopalMesh:
    """n x n squares, each cut by the zigzag (0,0)-(1/4,3/4)-(3/4,1/4)-(1,1)."""
    _check_n(n)
    loops = [
        [(0, 0), (1, 3), (3, 1), (4, 4), (0, 4)],
        [(0, 0), (4, 0), (4, 4), (3, 1), (1, 3)],
    ]
    return _lattice_mesh(n, 4, loops, boundary)


FAMILIES = {"triangular": build_triangular, "pentagon": build_nonconvex_pentagon}


def grid_family(family: str, level: int, boundary: Optional[BoundarySpec] = None) -> PolytopalMesh:
    """Grid G_level of a family: 2**(level-1) squares per side."""
    if family not in FAMILIES:
        raise ValueError(f"unknown mesh family {family!r}; expected one of {sorted(FAMILIES)}")
    if int(level) != level or level < 1:
        raise ValueError(f"grid level must be a positive integer, got {level!r}")
    return FAMILIES[family](2 ** (int(level) - 1), boundary)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"cells per side must be a positive integer, got {n!r}")


# -- POLYMESH text format -----------------------------------------------------

def save_mesh(mesh: PolytopalMesh, path) -> None:
    lines = ["POLYMESH 1", str(mesh.n_vertices)]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(str(mesh.n_cells))
    lines += [" ".join(str(v) for v in [len(c), *c.tolist()]) for c in mesh.cells]
    bnd = mesh.boundary_edges()
    lines.append(str(len(bnd)))
    lines += [f"{mesh.edges[ie, 0]} {mesh.edges[ie, 1]} {mesh.edge_tags[ie]}" for ie in bnd]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path) -> PolytopalMesh:
    with open(path) as fh:
        raw = fh.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(raw) and not raw[pos].strip():
            pos += 1
        if pos >= len(raw):
            raise MeshError(f"line {pos + 1}: unexpected end of file")
        pos += 1
        return pos, raw[pos - 1].split()

    def ints(lineno, tokens, count=None):
        try:
            vals = [int(t) for t in tokens]
        except ValueError:
            raise MeshError(f"line {lineno}: expected integers, got {' '.join(tokens)!r}") from None
        if count is not None and len(vals) != count:
            raise MeshError(f"line {lineno}: expected {count} integers")
        return vals

    lineno, tok = next_line()
    if tok != ["POLYMESH", "1"]:
        raise MeshError(f"line {lineno}: bad header, expected 'POLYMESH 1'")
    lineno, tok = next_line()
    (nv,) = ints(lineno, tok, 1)
    verts = np.empty((nv, 2))
    for i in range(nv):
        lineno, tok = next_line()
        try:
            verts[i] = [float(tok[0]), float(tok[1])]
            if len(tok) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise MeshError(f"line {lineno}: expected 'x y'") from None
    lineno, tok = next_line()
    (nc,) = ints(lineno, tok, 1)
    cells = []
    for ic in range(nc):
        lineno, tok = next_line()
        vals = ints(lineno, tok)
        if not vals or vals[0] != len(vals) - 1 or vals[0] < 3:
            raise MeshError(f"line {lineno}: cell {ic} vertex count mismatch")
        loop = vals[1:]
        if min(loop) < 0 or max(loop) >= nv:
            raise MeshError(f"line {lineno}: cell {ic} references vertex index outside [0, {nv})")
        if signed_area(verts[loop]) <= 0:
            raise MeshError(f"line {lineno}: cell {ic} is not counter-clockwise")
        cells.append(loop)
    lineno, tok = next_line()
    (nb,) = ints(lineno, tok, 1)
    tags = {}
    for _ in range(nb):
        lineno, tok = next_line()
        a, b, t = ints(lineno, tok, 3)
        if t not in (GAMMA1, GAMMA2):
            raise MeshError(f"line {lineno}: boundary tag must be 1 or 2")
        tags[(min(a, b), max(a, b))] = t
    mesh = PolytopalMesh(verts, cells, boundary_tags=tags)
    known = {tuple(mesh.edges[ie]) for ie in mesh.boundary_edges()}
    stray = set(tags) - known
    if stray:
        raise MeshError(f"boundary tag records reference non-boundary edges: {sorted(stray)[:3]}")
    return mesh
