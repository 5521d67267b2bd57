"""Simplicial meshes, sub-simplex tables and facet frames.

A mesh stores, besides vertices and cells, one table per codimension
``k = 1..n`` holding the (n-k)-dimensional sub-simplices (faces, edges,
vertices) together with their incident cells and a boundary flag.  Each
sub-simplex also carries a deterministic orthonormal frame of the ``k``
directions normal to it; the frame depends only on the entity itself
(coordinates plus global vertex ids), never on the cell it is requested
from.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CellGeometry",
    "CellContext",
    "FacetFrame",
    "SubSimplex",
    "SimplicialMesh",
    "simplex_geometry",
    "facet_measure",
    "facet_frame_vectors",
    "generate_unit_square_mesh",
    "generate_lshape_mesh",
    "enumerate_subsimplices",
    "facet_frame",
    "dump_mesh",
]


@dataclass(frozen=True)
class CellGeometry:
    """Affine geometry of one simplex: vertices, measure, barycentric gradients."""

    vertices: np.ndarray      # (n+1, n)
    volume: float             # positive n-measure
    bary_grads: np.ndarray    # (n+1, n), row i = grad of barycentric coordinate i

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def to_physical(self, bary: np.ndarray) -> np.ndarray:
        """Map barycentric points (m, n+1) to physical coordinates (m, n)."""
        return np.asarray(bary) @ self.vertices


def signed_volume(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    n = v.shape[1]
    return float(np.linalg.det(v[1:] - v[0]) / math.factorial(n))


def simplex_geometry(vertices: np.ndarray) -> CellGeometry:
    """Build :class:`CellGeometry`; raises on a degenerate simplex."""
    v = np.asarray(vertices, dtype=float)
    n = v.shape[1]
    if v.shape != (n + 1, n):
        raise ValueError(f"expected {n + 1} vertices in R^{n}, got shape {v.shape}")
    vol = signed_volume(v)
    if abs(vol) < 1e-14 * max(1.0, float(np.abs(v).max())) ** n:
        raise ValueError("degenerate simplex (zero volume)")
    # lambda(x) = A^{-1} [1; x] with A = [[1..1], [vertex coords columnwise]]
    a = np.ones((n + 1, n + 1))
    a[1:, :] = v.T
    ainv = np.linalg.inv(a)
    return CellGeometry(vertices=v, volume=abs(vol), bary_grads=ainv[:, 1:].copy())


def facet_measure(coords: np.ndarray) -> float:
    """d-measure of a d-simplex embedded in R^n (1.0 for a single vertex)."""
    c = np.asarray(coords, dtype=float)
    d = c.shape[0] - 1
    if d == 0:
        return 1.0
    e = c[1:] - c[0]
    gram = e @ e.T
    return float(np.sqrt(abs(np.linalg.det(gram))) / math.factorial(d))


def facet_frame_vectors(coords: np.ndarray, global_ids, dim: int) -> np.ndarray:
    """Orthonormal directions normal to a sub-simplex, with canonical signs.

    Conventions (frozen so that every incident cell sees the same frame):
    vertices get the global Cartesian axes; a 2D edge gets the +90-degree
    rotation of its low-id to high-id direction; a 3D face gets the cross
    product of its id-sorted edge vectors; a 3D edge gets the axis least
    aligned with it, orthonormalized, completed by a cross product.
    """
    c = np.asarray(coords, dtype=float)
    ids = list(global_ids)
    d = c.shape[0] - 1
    if d == 0:
        return np.eye(dim)
    order = np.argsort(ids)
    c = c[order]
    if dim == 2 and d == 1:
        t = c[1] - c[0]
        t = t / np.linalg.norm(t)
        return np.array([[-t[1], t[0]]])
    if dim == 3 and d == 2:
        nrm = np.cross(c[1] - c[0], c[2] - c[0])
        return (nrm / np.linalg.norm(nrm)).reshape(1, 3)
    if dim == 3 and d == 1:
        t = c[1] - c[0]
        t = t / np.linalg.norm(t)
        axis = int(np.argmin(np.abs(t)))
        e = np.zeros(3)
        e[axis] = 1.0
        n1 = e - (e @ t) * t
        n1 = n1 / np.linalg.norm(n1)
        n2 = np.cross(t, n1)
        return np.array([n1, n2])
    raise ValueError(f"no frame convention for a {d}-simplex in R^{dim}")


@dataclass(frozen=True)
class FacetFrame:
    """Measure and normal frame of one sub-simplex."""

    entity: tuple[int, int]    # (k, table index); (k, -1) for standalone cells
    measure: float
    normals: np.ndarray        # (k, dim)


@dataclass
class SubSimplex:
    """One (n-k)-dimensional sub-simplex with mesh incidence data."""

    k: int
    index: int
    vertices: tuple[int, ...]        # sorted global vertex ids
    cells: tuple[int, ...]
    on_boundary: bool


class CellContext:
    """One cell of a mesh (or a standalone simplex) with geometry and frames."""

    def __init__(self, vertex_ids, coords, mesh: "SimplicialMesh | None" = None,
                 cell_index: int = -1):
        self.cell_index = cell_index
        self.vertex_ids = tuple(int(i) for i in vertex_ids)
        self.geometry = simplex_geometry(coords)
        self._mesh = mesh
        self._frames: dict[tuple[int, ...], FacetFrame] = {}

    @classmethod
    def standalone(cls, coords) -> "CellContext":
        coords = np.asarray(coords, dtype=float)
        if signed_volume(coords) < 0:
            coords = coords.copy()
            coords[[-2, -1]] = coords[[-1, -2]]
        return cls(tuple(range(len(coords))), coords)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def frame_for(self, local_vertices: tuple[int, ...]) -> FacetFrame:
        """Frame of the sub-simplex spanned by the given local vertices."""
        key = tuple(sorted(local_vertices))
        frame = self._frames.get(key)
        if frame is not None:
            return frame
        gids = tuple(self.vertex_ids[i] for i in key)
        if self._mesh is not None and len(key) <= self.dim:
            k = self.dim - (len(key) - 1)
            idx = self._mesh.subsimplex_index(k, gids)
            frame = self._mesh.facet_frame(k, idx)
        else:
            coords = self.geometry.vertices[list(key)]
            frame = FacetFrame(
                entity=(self.dim - (len(key) - 1), -1),
                measure=facet_measure(coords),
                normals=facet_frame_vectors(coords, gids, self.dim),
            )
        self._frames[key] = frame
        return frame


class SimplicialMesh:
    """Conforming simplicial mesh of dimension 1, 2 or 3."""

    def __init__(self, dim: int, vertices, cells):
        self.dim = int(dim)
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != self.dim:
            raise ValueError("vertex array must have shape (nv, dim)")
        cells = [tuple(int(v) for v in c) for c in cells]
        self.cells = np.array([self._canonical(c) for c in cells], dtype=np.int64)
        self._build_tables()
        self._frame_cache: dict[tuple[int, int], FacetFrame] = {}

    def _canonical(self, cell: tuple[int, ...]) -> tuple[int, ...]:
        if len(cell) != self.dim + 1:
            raise ValueError("cell must have dim+1 vertices")
        if signed_volume(self.vertices[list(cell)]) < 0:
            cell = cell[:-2] + (cell[-1], cell[-2])
        if signed_volume(self.vertices[list(cell)]) <= 0:
            raise ValueError(f"degenerate cell {cell}")
        return cell

    def _build_tables(self):
        n = self.dim
        self.subsimplex_tables: dict[int, list[SubSimplex]] = {}
        self._lookup: dict[int, dict[tuple[int, ...], int]] = {}
        incidence: dict[int, dict[tuple[int, ...], list[int]]] = {
            k: {} for k in range(1, n + 1)
        }
        for ci, cell in enumerate(self.cells):
            for k in range(1, n + 1):
                for combo in itertools.combinations(sorted(cell.tolist()), n + 1 - k):
                    incidence[k].setdefault(tuple(combo), []).append(ci)
        # facets (k=1) determine the boundary; anything inside a boundary
        # facet is itself a boundary entity
        facet_boundary = {
            verts: len(cs) == 1 for verts, cs in incidence[1].items()
        }
        for verts, cs in incidence[1].items():
            if len(cs) > 2:
                raise ValueError(f"facet {verts} shared by {len(cs)} cells")
        boundary_sets: dict[int, set[tuple[int, ...]]] = {1: set()}
        for verts, is_b in facet_boundary.items():
            if is_b:
                boundary_sets[1].add(verts)
        for k in range(2, n + 1):
            boundary_sets[k] = set()
            for fverts in boundary_sets[1]:
                for combo in itertools.combinations(fverts, n + 1 - k):
                    boundary_sets[k].add(tuple(combo))
        for k in range(1, n + 1):
            table = []
            lookup = {}
            for idx, verts in enumerate(sorted(incidence[k])):
                table.append(SubSimplex(
                    k=k, index=idx, vertices=verts,
                    cells=tuple(incidence[k][verts]),
                    on_boundary=verts in boundary_sets[k],
                ))
                lookup[verts] = idx
            self.subsimplex_tables[k] = table
            self._lookup[k] = lookup

    # -- queries ---------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def subsimplices(self, k: int) -> list[SubSimplex]:
        if k not in self.subsimplex_tables:
            raise ValueError(f"k must be in 1..{self.dim}, got {k}")
        return self.subsimplex_tables[k]

    def subsimplex_index(self, k: int, vertex_ids) -> int:
        return self._lookup[k][tuple(sorted(int(v) for v in vertex_ids))]

    def facet_frame(self, k: int, index: int) -> FacetFrame:
        key = (k, index)
        frame = self._frame_cache.get(key)
        if frame is None:
            ent = self.subsimplices(k)[index]
            coords = self.vertices[list(ent.vertices)]
            frame = FacetFrame(
                entity=key,
                measure=facet_measure(coords),
                normals=facet_frame_vectors(coords, ent.vertices, self.dim),
            )
            self._frame_cache[key] = frame
        return frame

    def cell_context(self, ci: int) -> CellContext:
        cell = self.cells[ci]
        return CellContext(cell, self.vertices[cell], mesh=self, cell_index=ci)

    def boundary_vertices(self) -> np.ndarray:
        flags = np.zeros(self.num_vertices, dtype=bool)
        for ent in self.subsimplices(self.dim):
            flags[ent.vertices[0]] = ent.on_boundary
        return np.nonzero(flags)[0]


# -- structured generators -------------------------------------------------

def _split_squares(nx_points, ny_points, keep, spacing, origin):
    """Triangulate selected grid squares, diagonal fixed lower-left to upper-right."""
    index = {}
    verts = []
    for j in range(ny_points):
        for i in range(nx_points):
            if keep((i, j)):
                index[(i, j)] = len(verts)
                verts.append((origin[0] + i * spacing, origin[1] + j * spacing))
    cells = []
    for j in range(ny_points - 1):
        for i in range(nx_points - 1):
            corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
            if all(c in index for c in corners):
                v00, v10, v01, v11 = (index[c] for c in corners)
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
    return SimplicialMesh(2, np.array(verts, dtype=float), cells)


def generate_unit_square_mesh(n_div: int) -> SimplicialMesh:
    """Uniform triangulation of (0,1)^2 with 2*n_div^2 congruent right triangles."""
    if n_div < 1:
        raise ValueError("n_div must be >= 1")
    return _split_squares(n_div + 1, n_div + 1, lambda ij: True,
                          1.0 / n_div, (0.0, 0.0))


def generate_lshape_mesh(n_div: int) -> SimplicialMesh:
    """Uniform triangulation of (-1,1)^2 minus the closed fourth-quadrant square.

    ``n_div`` is the number of squares per unit length (h = 1/n_div); the
    origin is always a mesh vertex.
    """
    if n_div < 1:
        raise ValueError("n_div must be >= 1")
    n = n_div
    h = 1.0 / n

    def keep(ij):
        i, j = ij
        x = -1.0 + i * h
        y = -1.0 + j * h
        return not (x > 1e-12 and y < -1e-12)

    return _split_squares(2 * n + 1, 2 * n + 1, keep, h, (-1.0, -1.0))


# -- spec-level operation aliases -------------------------------------------

def enumerate_subsimplices(mesh: SimplicialMesh, k: int) -> list[SubSimplex]:
    return mesh.subsimplices(k)


def facet_frame(mesh: SimplicialMesh, entity) -> FacetFrame:
    """Frame for an entity given as a SubSimplex or a (k, index) pair."""
    if isinstance(entity, SubSimplex):
        return mesh.facet_frame(entity.k, entity.index)
    k, index = entity
    return mesh.facet_frame(int(k), int(index))


def dump_mesh(mesh: SimplicialMesh) -> str:
    """Plain-text debug dump: DIM / VERTICES count + coords / CELLS count + tuples."""
    lines = [f"DIM {mesh.dim}", f"VERTICES {mesh.num_vertices}"]
    for v in mesh.vertices:
        lines.append(" ".join(f"{x:.17g}" for x in v))
    lines.append(f"CELLS {mesh.num_cells}")
    for c in mesh.cells:
        lines.append(" ".join(str(int(i)) for i in c))
    return "\n".join(lines) + "\n"
