"""Finite elements: degrees of freedom, nodal bases, local interpolation.

Two element families are provided on a cell T:

``wuxu`` (n = 1..3)
    Shape space P_{n+1} + bubble*P_1.  For every codimension k = 1..n,
    each (n-k)-dimensional sub-simplex F carries one averaged derivative
    DOF per multi-index alpha over the frame directions of F with
    |alpha| = n+1-k; vertices additionally carry point values.  In 2D this
    is 3 values + 6 gradient components + 3 edge averages of the second
    normal derivative (12 DOFs).

``robust`` (2D only)
    Shape space P_3 + bubble*P_1 + bubble^2*P_1 with 15 DOFs: per vertex
    the value and gradient, per edge the averages of both the first and
    second normal derivatives.  The value/first-derivative subset is the
    Morley DOF set, which is what makes the element usable for second and
    fourth order operators as well.

DOF ordering is frozen: vertices in cell order (value, then derivative
per frame axis), then edges, then faces; within an entity, derivative
multi-indices in first-component-descending order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import CellContext
from .polyspace import (
    BarycentricPolynomial,
    ShapeSpaceBasis,
    differentiate,
    robust_basis,
    wuxu_basis,
)
from .quadrature import reference_volume, simplex_rule

__all__ = [
    "DofFunctional",
    "FiniteElement",
    "shape_basis",
    "build_dof_set",
    "apply_dof",
    "dof_matrix",
    "nodal_basis",
    "dof_values",
    "local_interpolate",
    "PolynomialFunction",
    "check_unisolvency",
    "UnisolvencyReport",
    "random_shape_regular_simplex",
    "expected_dof_count",
]

POINT_VALUE = "point_value"
POINT_DERIVATIVE = "point_derivative"
FACET_AVERAGE = "facet_average"


@dataclass(frozen=True)
class DofFunctional:
    """A point value, point derivative, or facet-averaged derivative.

    ``vertices`` are local vertex indices of the owning sub-simplex;
    ``directions`` (k rows) and ``alpha`` encode the derivative
    d^{|alpha|} / d(dir_1)^{alpha_1} ... d(dir_k)^{alpha_k}.
    """

    kind: str
    vertices: tuple[int, ...]
    directions: np.ndarray | None
    alpha: tuple[int, ...]
    measure: float

    @property
    def order(self) -> int:
        return sum(self.alpha)

    def expanded_directions(self) -> list[np.ndarray]:
        dirs = []
        for row, count in zip(self.directions, self.alpha):
            dirs.extend([np.asarray(row, dtype=float)] * count)
        return dirs

    def label(self) -> str:
        ent = ",".join(str(v) for v in self.vertices)
        if self.kind == POINT_VALUE:
            return f"value@({ent})"
        return f"d{self.alpha}@({ent})"


def shape_basis(variant: str, dim: int) -> ShapeSpaceBasis:
    if variant == "wuxu":
        return wuxu_basis(dim)
    if variant == "robust":
        if dim != 2:
            raise ValueError("robust element is 2D only")
        return robust_basis()
    raise ValueError(f"unknown element variant {variant!r}")


def _derivative_alphas(order: int, k: int) -> list[tuple[int, ...]]:
    """Multi-indices over k frame directions with given total order."""
    combos = [c for c in itertools.product(range(order + 1), repeat=k)
              if sum(c) == order]
    combos.sort(reverse=True)
    return combos


def build_dof_set(variant: str, cell: CellContext) -> list[DofFunctional]:
    """Ordered DOF list for one cell, using the cell's entity frames."""
    n = cell.dim
    shape_basis(variant, n)  # validates the variant/dimension pair
    dofs: list[DofFunctional] = []
    # vertices: value then frame derivatives
    for v in range(n + 1):
        frame = cell.frame_for((v,))
        dofs.append(DofFunctional(POINT_VALUE, (v,), None, (), frame.measure))
        for alpha in _derivative_alphas(1, n):
            dofs.append(DofFunctional(POINT_DERIVATIVE, (v,), frame.normals,
                                      alpha, frame.measure))
    # higher-dimensional sub-simplices: edges then faces
    for d in range(1, n):
        k = n - d
        orders = [d + 1] if variant == "wuxu" else [2, 1]
        for combo in itertools.combinations(range(n + 1), d + 1):
            frame = cell.frame_for(combo)
            for order in orders:
                for alpha in _derivative_alphas(order, k):
                    dofs.append(DofFunctional(FACET_AVERAGE, combo, frame.normals,
                                              alpha, frame.measure))
    return dofs


def expected_dof_count(variant: str, dim: int) -> int:
    if variant == "wuxu":
        return math.comb(2 * dim + 1, dim) + dim
    return 15


def _facet_average(poly: BarycentricPolynomial, vertices: tuple[int, ...],
                   nvars: int, degree: int) -> float:
    """Average of a cell polynomial over the sub-simplex of the given vertices.

    Computed with a reference rule on the facet; the physical measure
    cancels from the average, so only normalized weights enter.
    """
    d = len(vertices) - 1
    if d == 0:
        bary = np.zeros(nvars)
        bary[vertices[0]] = 1.0
        return float(poly.evaluate(bary))
    rule = simplex_rule(d, max(1, degree))
    lifted = np.zeros((rule.num_points, nvars))
    for j, v in enumerate(vertices):
        lifted[:, v] = rule.points[:, j]
    vals = poly.evaluate(lifted)
    return float((rule.weights @ vals) / reference_volume(d))


def apply_dof(dof: DofFunctional, poly: BarycentricPolynomial,
              cell: CellContext) -> float:
    """Apply one DOF functional to a polynomial defined on the cell."""
    p = poly
    if dof.kind != POINT_VALUE:
        for direction in dof.expanded_directions():
            p = differentiate(p, direction, cell.geometry)
    return _facet_average(p, dof.vertices, p.nvars, p.degree())


def dof_matrix(variant: str, cell: CellContext):
    """Matrix D with D[i, j] = dof_i(basis_j), plus the dof list and basis."""
    basis = shape_basis(variant, cell.dim)
    dofs = build_dof_set(variant, cell)
    d = np.empty((len(dofs), basis.dimension))
    for j, p in enumerate(basis.polys):
        for i, dof in enumerate(dofs):
            d[i, j] = apply_dof(dof, p, cell)
    return d, dofs, basis


@dataclass
class FiniteElement:
    """Nodal element on one cell: D @ coeffs = identity defines the basis."""

    variant: str
    cell: CellContext
    dofs: list[DofFunctional]
    basis: ShapeSpaceBasis
    dmatrix: np.ndarray
    coeffs: np.ndarray      # column j = shape-basis coefficients of p_j

    @property
    def num_dofs(self) -> int:
        return len(self.dofs)

    def nodal_polynomial(self, j: int) -> BarycentricPolynomial:
        out = BarycentricPolynomial.zero(self.basis.nvars)
        for i, c in enumerate(self.coeffs[:, j]):
            if c != 0.0:
                out = out + c * self.basis.polys[i]
        return out

    def interpolate_coeffs(self, dof_vals: np.ndarray) -> np.ndarray:
        """Shape-basis coefficients of sum_j dof_vals[j] * p_j."""
        return self.coeffs @ np.asarray(dof_vals, dtype=float)


def nodal_basis(variant: str, cell: CellContext) -> FiniteElement:
    d, dofs, basis = dof_matrix(variant, cell)
    sv = np.linalg.svd(d, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RuntimeError(
            f"singular DOF matrix for {variant} on cell {cell.cell_index}: "
            f"cond={sv[0] / max(sv[-1], np.finfo(float).tiny):.3e}")
    coeffs = np.linalg.solve(d, np.eye(len(dofs)))
    return FiniteElement(variant, cell, dofs, basis, d, coeffs)


# -- applying DOFs to general (non-polynomial) functions --------------------

class PolynomialFunction:
    """Adapter exposing a cell polynomial through the analytic-function protocol."""

    def __init__(self, poly: BarycentricPolynomial, geometry):
        self.poly = poly
        self.geometry = geometry
        n = geometry.dim
        a = np.ones((n + 1, n + 1))
        a[1:, :] = geometry.vertices.T
        self._to_bary = np.linalg.inv(a)

    def partial(self, alpha, pts) -> np.ndarray:
        from .polyspace import cartesian_derivative

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ones = np.column_stack([np.ones(pts.shape[0]), pts])
        bary = ones @ self._to_bary.T
        return np.asarray(cartesian_derivative(self.poly, alpha,
                                               self.geometry).evaluate(bary))


def _directional_weights(directions: list[np.ndarray], dim: int) -> dict:
    """Cartesian multi-index weights of a repeated directional derivative."""
    weights: dict[tuple[int, ...], float] = {}
    r = len(directions)
    for combo in itertools.product(range(dim), repeat=r):
        c = 1.0
        for t, axis in enumerate(combo):
            c *= directions[t][axis]
        if c != 0.0:
            gamma = [0] * dim
            for axis in combo:
                gamma[axis] += 1
            gamma = tuple(gamma)
            weights[gamma] = weights.get(gamma, 0.0) + c
    return weights


def dof_values(dofs, f, cell: CellContext, quad_degree: int = 20) -> np.ndarray:
    """Evaluate DOFs on a function with Cartesian partials ``f.partial(alpha, pts)``.

    Facet averages integrate the analytic directional derivative with a
    high-order facet rule; nothing is approximated by differencing.
    """
    n = cell.dim
    out = np.empty(len(dofs))
    for i, dof in enumerate(dofs):
        pt = cell.geometry.vertices[list(dof.vertices)]
        if dof.kind == POINT_VALUE:
            out[i] = float(f.partial((0,) * n, pt[:1])[0])
            continue
        weights = _directional_weights(dof.expanded_directions(), n)
        if dof.kind == POINT_DERIVATIVE:
            out[i] = sum(c * float(f.partial(g, pt[:1])[0])
                         for g, c in weights.items())
            continue
        d = len(dof.vertices) - 1
        rule = simplex_rule(d, quad_degree)
        pts = rule.points @ pt
        vals = np.zeros(rule.num_points)
        for g, c in weights.items():
            vals += c * np.asarray(f.partial(g, pts))
        out[i] = float((rule.weights @ vals) / reference_volume(d))
    return out


def local_interpolate(variant: str, cell: CellContext, f,
                      quad_degree: int = 20) -> np.ndarray:
    """Shape-basis coefficients of the canonical nodal interpolant of f."""
    elem = nodal_basis(variant, cell)
    vals = dof_values(elem.dofs, f, cell, quad_degree)
    return elem.interpolate_coeffs(vals)


# -- unisolvency lab ---------------------------------------------------------

def reference_simplex(n: int) -> np.ndarray:
    verts = np.zeros((n + 1, n))
    for i in range(n):
        verts[i + 1, i] = 1.0
    return verts


def random_shape_regular_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random affine image of the reference simplex with bounded distortion."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    a = q @ (np.eye(n) + rng.uniform(-0.25, 0.25, size=(n, n)))
    scale = rng.uniform(0.5, 2.0)
    shift = rng.uniform(-1.0, 1.0, size=n)
    return reference_simplex(n) @ (scale * a).T + shift


@dataclass
class UnisolvencyTrial:
    n: int
    variant: str
    trial: int            # 0 is the reference simplex
    cond: float
    passed: bool


@dataclass
class UnisolvencyReport:
    n: int
    variant: str
    space_dim: int
    num_dofs: int
    trials: list[UnisolvencyTrial] = field(default_factory=list)

    @property
    def dimensions_match(self) -> bool:
        return self.space_dim == self.num_dofs

    @property
    def all_passed(self) -> bool:
        return self.dimensions_match and all(t.passed for t in self.trials)

    def to_text(self) -> str:
        head = (f"{self.variant} n={self.n}: dim(space)={self.space_dim}, "
                f"#DOFs={self.num_dofs}, trials={len(self.trials)}")
        conds = [t.cond for t in self.trials]
        stats = (f"  cond: min={min(conds):.3e} max={max(conds):.3e}"
                 if conds else "")
        verdict = "PASS" if self.all_passed else "FAIL"
        return f"{head}\n{stats}\n  {verdict}"

    def csv_rows(self) -> list[str]:
        return [f"{t.n},{t.variant},{t.trial},{t.cond:.6e},"
                f"{'pass' if t.passed else 'fail'}" for t in self.trials]


def check_unisolvency(n: int, variant: str, trials: int = 100,
                      seed: int = 20240301) -> UnisolvencyReport:
    """DOF-matrix invertibility on the reference simplex plus random ones.

    A trial passes iff the smallest singular value exceeds 1e-10 times the
    largest.  Condition numbers are reported as frame-dependent diagnostics.
    """
    basis = shape_basis(variant, n)
    ref = CellContext.standalone(reference_simplex(n))
    report = UnisolvencyReport(n=n, variant=variant, space_dim=basis.dimension,
                               num_dofs=len(build_dof_set(variant, ref)))
    rng = np.random.default_rng(seed)
    cells = [ref] + [CellContext.standalone(random_shape_regular_simplex(n, rng))
                     for _ in range(trials)]
    for t, cell in enumerate(cells):
        d, _, _ = dof_matrix(variant, cell)
        sv = np.linalg.svd(d, compute_uv=False)
        cond = float(sv[0] / max(sv[-1], np.finfo(float).tiny))
        report.trials.append(UnisolvencyTrial(
            n=n, variant=variant, trial=t, cond=cond,
            passed=bool(sv[-1] > 1e-10 * sv[0])))
    return report
