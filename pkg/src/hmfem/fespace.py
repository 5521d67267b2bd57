"""Global nonconforming spaces: DOF identification, boundary data, continuity.

A global DOF is owned by a mesh entity (vertex or edge) and is shared by
every incident cell, which realizes the averaged-derivative continuity of
the nonconforming space.  Vertex derivative DOFs are stored as global
Cartesian gradient components, so in 2D every shared DOF is single-valued
with sign +1; the sign array exists for generality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import element as el
from .mesh import SimplicialMesh
from .polyspace import cartesian_derivative
from .quadrature import reference_volume, simplex_rule
from .tables import cell_ops

__all__ = [
    "DofRecord",
    "GlobalDofMap",
    "BoundaryConditionSpec",
    "ConstraintSet",
    "build_global_dof_map",
    "classify_and_constrain",
    "interpolate_global",
    "verify_face_average_continuity",
    "boundary_moment_report",
    "point_continuity_gap",
    "ContinuityReport",
]

_VERTEX_COMPONENTS = ("value", "dx", "dy")
_EDGE_COMPONENTS = {"wuxu": ("d2n",), "robust": ("d2n", "dn")}


@dataclass(frozen=True)
class DofRecord:
    entity_kind: str          # "vertex" | "edge"
    entity_index: int
    component: str            # "value" | "dx" | "dy" | "d2n" | "dn"
    on_boundary: bool


class GlobalDofMap:
    """Mesh-entity-owned global DOFs with per-cell local-to-global maps."""

    def __init__(self, mesh: SimplicialMesh, variant: str):
        if mesh.dim != 2:
            raise ValueError("global spaces are built in 2D only")
        self.mesh = mesh
        self.variant = variant
        edge_comps = _EDGE_COMPONENTS[variant]
        nv = mesh.num_vertices
        edges = mesh.subsimplices(1)
        vertex_boundary = np.zeros(nv, dtype=bool)
        for ent in mesh.subsimplices(2):
            vertex_boundary[ent.vertices[0]] = ent.on_boundary
        self.records: list[DofRecord] = []
        for vid in range(nv):
            for comp in _VERTEX_COMPONENTS:
                self.records.append(DofRecord("vertex", vid, comp,
                                              bool(vertex_boundary[vid])))
        self._edge_base = 3 * nv
        self._edge_stride = len(edge_comps)
        for eid, ent in enumerate(edges):
            for comp in edge_comps:
                self.records.append(DofRecord("edge", eid, comp,
                                              ent.on_boundary))
        self.num_dofs = len(self.records)
        self._build_cell_maps()

    def _build_cell_maps(self):
        mesh, variant = self.mesh, self.variant
        ncells = mesh.num_cells
        sample = el.build_dof_set(variant, mesh.cell_context(0))
        j = len(sample)
        self.cell_dofs = np.empty((ncells, j), dtype=np.int64)
        self.signs = np.ones((ncells, j))
        for ci in range(ncells):
            ctx = mesh.cell_context(ci)
            dofs = el.build_dof_set(variant, ctx)
            for a, dof in enumerate(dofs):
                self.cell_dofs[ci, a] = self._global_index(ctx, dof)

    def _global_index(self, ctx, dof: el.DofFunctional) -> int:
        gids = tuple(ctx.vertex_ids[v] for v in dof.vertices)
        if dof.kind == el.POINT_VALUE:
            return 3 * gids[0]
        if dof.kind == el.POINT_DERIVATIVE:
            axis = int(np.argmax(np.abs(dof.directions[dof.alpha.index(1)])))
            return 3 * gids[0] + 1 + axis
        eid = self.mesh.subsimplex_index(1, gids)
        comps = _EDGE_COMPONENTS[self.variant]
        slot = comps.index("d2n" if dof.order == 2 else "dn")
        return self._edge_base + self._edge_stride * eid + slot

    @property
    def num_local_dofs(self) -> int:
        return self.cell_dofs.shape[1]

    def local_values(self, ci: int, vector: np.ndarray) -> np.ndarray:
        return vector[self.cell_dofs[ci]] * self.signs[ci]

    def boundary_dofs(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.records) if r.on_boundary],
                        dtype=np.int64)


def build_global_dof_map(mesh: SimplicialMesh, variant: str) -> GlobalDofMap:
    return GlobalDofMap(mesh, variant)


# -- boundary conditions -----------------------------------------------------

@dataclass(frozen=True)
class BoundaryConditionSpec:
    """Full Dirichlet data, or constraints on normal derivatives only.

    ``dirichlet`` constrains every boundary-entity DOF to the canonical
    interpolant of ``data``.  ``mixed-normal`` (robust element only)
    constrains boundary-edge averages of the first normal derivative and
    the normal gradient components at boundary vertices; ``pin_value``
    additionally fixes the value DOF at global vertex 0, which restores
    well-posedness for forms with no zeroth-order term.
    """

    kind: str                      # "dirichlet" | "mixed-normal"
    data: object | None = None     # AnalyticFunction-like, or None for zero
    pin_value: bool = False

    def __post_init__(self):
        if self.kind not in ("dirichlet", "mixed-normal"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")


@dataclass
class ConstraintSet:
    num_dofs: int
    indices: np.ndarray
    values: np.ndarray

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.num_dofs, dtype=bool)
        mask[self.indices] = False
        return np.nonzero(mask)[0]

    def apply_to(self, vector: np.ndarray):
        vector[self.indices] = self.values


def _point_partial(data, alpha, point) -> float:
    if data is None:
        return 0.0
    return float(np.asarray(data.partial(alpha, point[None, :]))[0])


def _edge_average(data, mesh, eid, order: int, degree: int = 20) -> float:
    """Average over an edge of the order-th normal derivative of the data."""
    if data is None:
        return 0.0
    ent = mesh.subsimplices(1)[eid]
    frame = mesh.facet_frame(1, eid)
    coords = mesh.vertices[list(ent.vertices)]
    rule = simplex_rule(1, degree)
    pts = rule.points @ coords
    weights = el._directional_weights([frame.normals[0]] * order, mesh.dim)
    vals = np.zeros(rule.num_points)
    for gamma, c in weights.items():
        vals += c * np.asarray(data.partial(gamma, pts))
    return float((rule.weights @ vals) / reference_volume(1))


def _record_value(dofmap: GlobalDofMap, record: DofRecord, data) -> float:
    mesh = dofmap.mesh
    if record.entity_kind == "vertex":
        point = mesh.vertices[record.entity_index]
        if record.component == "value":
            return _point_partial(data, (0, 0), point)
        alpha = (1, 0) if record.component == "dx" else (0, 1)
        return _point_partial(data, alpha, point)
    order = 2 if record.component == "d2n" else 1
    return _edge_average(data, mesh, record.entity_index, order)


def classify_and_constrain(dofmap: GlobalDofMap,
                           bc: BoundaryConditionSpec) -> ConstraintSet:
    """Split DOFs into free and constrained, with constraint values."""
    values: dict[int, float] = {}
    if bc.kind == "dirichlet":
        for i, rec in enumerate(dofmap.records):
            if rec.on_boundary:
                values[i] = _record_value(dofmap, rec, bc.data)
    else:
        if dofmap.variant != "robust":
            raise ValueError("mixed-normal constraints require the robust element")
        mesh = dofmap.mesh
        for i, rec in enumerate(dofmap.records):
            if rec.entity_kind == "edge" and rec.component == "dn" \
                    and rec.on_boundary:
                values[i] = _record_value(dofmap, rec, bc.data)
        for eid, ent in enumerate(mesh.subsimplices(1)):
            if not ent.on_boundary:
                continue
            normal = mesh.facet_frame(1, eid).normals[0]
            axis = int(np.argmax(np.abs(normal)))
            if abs(normal[1 - axis]) > 1e-12:
                raise NotImplementedError(
                    "mixed-normal vertex constraints need axis-aligned edges")
            for vid in ent.vertices:
                comp = "dx" if axis == 0 else "dy"
                gdof = 3 * vid + 1 + axis
                alpha = (1, 0) if axis == 0 else (0, 1)
                values[gdof] = _point_partial(bc.data, alpha,
                                              mesh.vertices[vid])
        if bc.pin_value:
            values[0] = _point_partial(bc.data, (0, 0), mesh.vertices[0])
    idx = np.array(sorted(values), dtype=np.int64)
    return ConstraintSet(dofmap.num_dofs, idx,
                         np.array([values[i] for i in idx]))


def interpolate_global(dofmap: GlobalDofMap, data) -> np.ndarray:
    """Canonical interpolant: every global DOF evaluated on its own entity."""
    out = np.empty(dofmap.num_dofs)
    for i, rec in enumerate(dofmap.records):
        out[i] = _record_value(dofmap, rec, data)
    return out


# -- continuity diagnostics --------------------------------------------------

@dataclass
class ContinuityReport:
    edge_jumps: dict = field(default_factory=dict)   # order -> max |jump of int_F d^a|
    vertex_gap: float = 0.0                          # values and gradients at vertices

    @property
    def max_jump(self) -> float:
        vals = list(self.edge_jumps.values()) + [self.vertex_gap]
        return max(vals) if vals else 0.0


def _cell_polynomial(dofmap: GlobalDofMap, ci: int, vector: np.ndarray):
    ctx = dofmap.mesh.cell_context(ci)
    elem = cell_ops(dofmap.variant, ctx).element
    shape_coeffs = elem.coeffs @ dofmap.local_values(ci, vector)
    poly = None
    for c, p in zip(shape_coeffs, elem.basis.polys):
        term = c * p
        poly = term if poly is None else poly + term
    return poly, ctx


def _edge_moment(poly, ctx, edge_gids, alpha, degree: int = 12) -> float:
    """Integral over the edge of d^alpha of a cell polynomial."""
    local = tuple(ctx.vertex_ids.index(g) for g in edge_gids)
    dp = cartesian_derivative(poly, alpha, ctx.geometry)
    rule = simplex_rule(1, degree)
    lifted = np.zeros((rule.num_points, poly.nvars))
    for j, v in enumerate(local):
        lifted[:, v] = rule.points[:, j]
    avg = float((rule.weights @ dp.evaluate(lifted)) / reference_volume(1))
    frame = ctx.frame_for(local)
    return avg * frame.measure


def _moment_orders(variant: str) -> list[int]:
    return [2] if variant == "wuxu" else [1, 2]


def verify_face_average_continuity(dofmap: GlobalDofMap,
                                   vector: np.ndarray) -> ContinuityReport:
    """Max interior-edge jump of the averaged derivative moments, plus the
    spread of vertex values/gradients across incident cells."""
    mesh = dofmap.mesh
    report = ContinuityReport(edge_jumps={
        o: 0.0 for o in _moment_orders(dofmap.variant)})
    polys = {}

    def poly_of(ci):
        if ci not in polys:
            polys[ci] = _cell_polynomial(dofmap, ci, vector)
        return polys[ci]

    for ent in mesh.subsimplices(1):
        if ent.on_boundary:
            continue
        for order in report.edge_jumps:
            for alpha, _ in _alphas(order):
                vals = []
                for ci in ent.cells:
                    poly, ctx = poly_of(ci)
                    vals.append(_edge_moment(poly, ctx, ent.vertices, alpha))
                jump = max(vals) - min(vals)
                report.edge_jumps[order] = max(report.edge_jumps[order], jump)
    for ent in mesh.subsimplices(2):
        if len(ent.cells) < 2:
            continue
        vid = ent.vertices[0]
        for alpha in [(0, 0), (1, 0), (0, 1)]:
            vals = []
            for ci in ent.cells:
                poly, ctx = poly_of(ci)
                local = ctx.vertex_ids.index(vid)
                bary = np.zeros(poly.nvars)
                bary[local] = 1.0
                dp = cartesian_derivative(poly, alpha, ctx.geometry)
                vals.append(float(dp.evaluate(bary)))
            report.vertex_gap = max(report.vertex_gap, max(vals) - min(vals))
    return report


def boundary_moment_report(dofmap: GlobalDofMap,
                           vector: np.ndarray) -> ContinuityReport:
    """Max |int_F d^alpha v| over boundary edges, and boundary vertex traces."""
    mesh = dofmap.mesh
    report = ContinuityReport(edge_jumps={
        o: 0.0 for o in _moment_orders(dofmap.variant)})
    for ent in mesh.subsimplices(1):
        if not ent.on_boundary:
            continue
        ci = ent.cells[0]
        poly, ctx = _cell_polynomial(dofmap, ci, vector)
        for order in report.edge_jumps:
            for alpha, _ in _alphas(order):
                val = abs(_edge_moment(poly, ctx, ent.vertices, alpha))
                report.edge_jumps[order] = max(report.edge_jumps[order], val)
    for ent in mesh.subsimplices(2):
        if not ent.on_boundary:
            continue
        vid = ent.vertices[0]
        ci = ent.cells[0]
        poly, ctx = _cell_polynomial(dofmap, ci, vector)
        local = ctx.vertex_ids.index(vid)
        bary = np.zeros(poly.nvars)
        bary[local] = 1.0
        for alpha in [(0, 0), (1, 0), (0, 1)]:
            dp = cartesian_derivative(poly, alpha, ctx.geometry)
            report.vertex_gap = max(report.vertex_gap,
                                    abs(float(dp.evaluate(bary))))
    return report


def point_continuity_gap(dofmap: GlobalDofMap, vector: np.ndarray,
                         samples: int = 5) -> float:
    """Max mismatch of point values across interior edges (H^1 conformity)."""
    mesh = dofmap.mesh
    ts = (np.arange(samples) + 1.0) / (samples + 1.0)
    gap = 0.0
    polys = {}
    for ent in mesh.subsimplices(1):
        if ent.on_boundary:
            continue
        pts = np.outer(1 - ts, mesh.vertices[ent.vertices[0]]) \
            + np.outer(ts, mesh.vertices[ent.vertices[1]])
        traces = []
        for ci in ent.cells:
            if ci not in polys:
                polys[ci] = _cell_polynomial(dofmap, ci, vector)
            poly, ctx = polys[ci]
            local = tuple(ctx.vertex_ids.index(g) for g in ent.vertices)
            lifted = np.zeros((samples, poly.nvars))
            lifted[:, local[0]] = 1 - ts
            lifted[:, local[1]] = ts
            traces.append(poly.evaluate(lifted))
        gap = max(gap, float(np.max(np.abs(traces[0] - traces[1]))))
    return gap


def _alphas(order: int):
    out = [c for c in itertools.product(range(order + 1), repeat=2)
           if sum(c) == order]
    out.sort(reverse=True)
    return [(a, 1.0) for a in out]
