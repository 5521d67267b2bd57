"""Benchmark problems, manufactured solutions, and broken-norm errors.

Three exact solutions drive the studies:

* ``exp(pi*y) sin(pi*x)`` on the unit square (harmonic, so the sixth-order
  problem has zero load and inhomogeneous Dirichlet data);
* ``r^2.5 sin(2.5*theta)`` on the L-shaped domain, with the angle measured
  counterclockwise from the positive x axis in [0, 2*pi); the solution is
  harmonic with limited regularity at the reentrant corner, and Cartesian
  derivatives of order >= 2 are refused exactly at the origin;
* ``cos(pi*x) cos(pi*y)`` on the unit square, whose normal derivative and
  all normal derivatives of its Laplacians vanish on the boundary, making
  it the natural manufactured solution for the mixed-boundary schemes.

The robust-element cases use the ``frobenius`` form convention: their
loads are derived from the operator (-Laplace)^3, which is what the
derivative-tensor contraction integrates by parts to.  The tri-harmonic
Dirichlet studies default to the ``multiindex`` convention of the plain
Sobolev seminorm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .assembly import BilinearFormSpec, assemble, assemble_load, solve_constrained
from .fespace import (
    BoundaryConditionSpec,
    GlobalDofMap,
    build_global_dof_map,
    classify_and_constrain,
)
from .mesh import SimplicialMesh, generate_lshape_mesh, generate_unit_square_mesh
from .quadrature import simplex_rule
from .tables import cell_ops, order_alphas

__all__ = [
    "AnalyticFunction",
    "ProblemCase",
    "ErrorRecord",
    "unit_square_solution",
    "corner_solution",
    "cosine_solution",
    "example1",
    "example2",
    "robust_case",
    "perturbed_sweep_case",
    "broken_error",
    "energy_error",
    "solve_case",
    "run_convergence_study",
    "observed_order",
]


@dataclass(frozen=True)
class AnalyticFunction:
    """Closed-form function with all Cartesian partial derivatives."""

    name: str
    domain: str
    _partial: Callable[[tuple[int, ...], np.ndarray], np.ndarray]

    def partial(self, alpha, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.asarray(self._partial(tuple(int(a) for a in alpha), pts),
                          dtype=float)

    def __call__(self, pts) -> np.ndarray:
        return self.partial((0, 0), pts)

    def gradient(self, pts) -> np.ndarray:
        return np.column_stack([self.partial((1, 0), pts),
                                self.partial((0, 1), pts)])


def unit_square_solution() -> AnalyticFunction:
    """u = exp(pi*y) sin(pi*x); every partial has closed form."""

    def partial(alpha, pts):
        a, b = alpha
        return (np.pi ** (a + b) * np.exp(np.pi * pts[:, 1])
                * np.sin(np.pi * pts[:, 0] + a * np.pi / 2.0))

    return AnalyticFunction("exp_sin", "unit-square", partial)


def corner_solution() -> AnalyticFunction:
    """u = r^2.5 sin(2.5*theta) on the L-shape; singular at the origin.

    d^(a,b) u = c_p r^(2.5-p) sin((2.5-p)*theta + b*pi/2) with p = a+b and
    c_p the falling product 2.5*(2.5-1)*...*(2.5-p+1).
    """

    def partial(alpha, pts):
        a, b = alpha
        p = a + b
        x, y = pts[:, 0], pts[:, 1]
        r = np.hypot(x, y)
        if p >= 2 and np.any(r < 1e-14):
            raise ValueError(
                "derivatives of order >= 2 are singular at the origin")
        theta = np.arctan2(y, x)
        theta = np.where(theta < 0, theta + 2 * np.pi, theta)
        c = 1.0
        for t in range(p):
            c *= 2.5 - t
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = c * r ** (2.5 - p) * np.sin((2.5 - p) * theta
                                               + b * np.pi / 2.0)
        return np.where(r < 1e-14, 0.0, vals) if p < 2 else vals

    return AnalyticFunction("corner_singularity", "lshape", partial)


def cosine_solution() -> AnalyticFunction:
    """u = cos(pi*x) cos(pi*y); normal derivatives vanish on the square."""

    def partial(alpha, pts):
        a, b = alpha
        return (np.pi ** (a + b)
                * np.cos(np.pi * pts[:, 0] + a * np.pi / 2.0)
                * np.cos(np.pi * pts[:, 1] + b * np.pi / 2.0))

    return AnalyticFunction("cos_cos", "unit-square", partial)


_MESH_GENERATORS = {
    "unit-square": generate_unit_square_mesh,
    "lshape": generate_lshape_mesh,
}


@dataclass(frozen=True)
class ProblemCase:
    """A mesh family, element, form, boundary treatment, and exact solution."""

    name: str
    domain: str
    variant: str
    form: BilinearFormSpec
    bc: BoundaryConditionSpec
    exact: AnalyticFunction
    load: Callable[[np.ndarray], np.ndarray] | None

    def __post_init__(self):
        if self.exact.domain != self.domain:
            raise ValueError("exact solution domain does not match the case")

    def mesh(self, level: int) -> SimplicialMesh:
        return _MESH_GENERATORS[self.domain](level)

    def with_convention(self, convention: str) -> "ProblemCase":
        return replace(self, form=replace(self.form, convention=convention))


def example1(convention: str = "multiindex") -> ProblemCase:
    """Sixth-order Dirichlet problem on the unit square with zero load."""
    exact = unit_square_solution()
    return ProblemCase(
        name="triharmonic-square",
        domain="unit-square",
        variant="wuxu",
        form=BilinearFormSpec(c3=1.0, convention=convention),
        bc=BoundaryConditionSpec("dirichlet", data=exact),
        exact=exact,
        load=None,
    )


def example2(convention: str = "multiindex") -> ProblemCase:
    """Sixth-order Dirichlet problem on the L-shape with a corner singularity."""
    exact = corner_solution()
    return ProblemCase(
        name="triharmonic-lshape",
        domain="lshape",
        variant="wuxu",
        form=BilinearFormSpec(c3=1.0, convention=convention),
        bc=BoundaryConditionSpec("dirichlet", data=exact),
        exact=exact,
        load=None,
    )


def robust_case(b0: float = 1.0) -> ProblemCase:
    """Sixth-order problem with zeroth-order term and normal-derivative BCs.

    With u = cos(pi*x) cos(pi*y), (-Laplace)^3 u = 8 pi^6 u, so the load is
    (8 pi^6 + b0) u.
    """
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    exact = cosine_solution()
    factor = 8.0 * np.pi ** 6 + b0
    return ProblemCase(
        name="robust",
        domain="unit-square",
        variant="robust",
        form=BilinearFormSpec(c3=1.0, c0=b0, convention="frobenius"),
        bc=BoundaryConditionSpec("mixed-normal", data=exact),
        exact=exact,
        load=lambda pts, e=exact: factor * e(pts),
    )


def perturbed_sweep_case(epsilon: float) -> ProblemCase:
    """Singularly perturbed benchmark eps^2 * sixth-order + second-order.

    This is a constructed benchmark (no reference table): the mixed
    normal-derivative constraints leave constants free once the
    zeroth-order term is gone, so one vertex value is pinned to the exact
    solution for well-posedness.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    exact = cosine_solution()
    c3 = epsilon ** 2
    f3 = c3 * 8.0 * np.pi ** 6
    f1 = 2.0 * np.pi ** 2
    return ProblemCase(
        name="perturbed",
        domain="unit-square",
        variant="robust",
        form=BilinearFormSpec(c3=c3, c1=1.0, convention="frobenius"),
        bc=BoundaryConditionSpec("mixed-normal", data=exact, pin_value=True),
        exact=exact,
        load=lambda pts, e=exact: (f3 + f1) * e(pts),
    )


# -- error evaluation --------------------------------------------------------

_ERROR_DEGREE = 20
_CELL_CHUNK = 4096


def broken_error(dofmap: GlobalDofMap, x: np.ndarray, exact: AnalyticFunction,
                 k: int, convention: str = "multiindex",
                 quad_degree: int = _ERROR_DEGREE) -> float:
    """Broken H^k seminorm (L^2 norm for k = 0) of u_exact - u_h."""
    if not 0 <= k <= 3:
        raise ValueError("k must be in 0..3")
    mesh = dofmap.mesh
    rule = simplex_rule(mesh.dim, quad_degree)
    groups: dict[int, tuple] = {}
    for ci in range(mesh.num_cells):
        ops = cell_ops(dofmap.variant, mesh.cell_context(ci))
        groups.setdefault(id(ops), (ops, []))[1].append(ci)
    total = 0.0
    for ops, cells in groups.values():
        cells = np.asarray(cells)
        for lo in range(0, cells.size, _CELL_CHUNK):
            batch = cells[lo:lo + _CELL_CHUNK]
            dofvals = x[dofmap.cell_dofs[batch]] * dofmap.signs[batch]
            mono = dofvals @ ops.nodal_coeffs
            verts = mesh.vertices[mesh.cells[batch]]
            phys = np.einsum("qj,cjd->cqd", rule.points, verts)
            flat = phys.reshape(-1, mesh.dim)
            for alpha, w_alpha in order_alphas(mesh.dim, k, convention):
                uh = mono @ ops.derivative_operator(alpha, rule)
                ue = exact.partial(alpha, flat).reshape(uh.shape)
                diff = ue - uh
                total += w_alpha * ops.scale * float(((diff * diff)
                                                      @ rule.weights).sum())
    return math.sqrt(total)


def energy_error(dofmap: GlobalDofMap, x: np.ndarray, exact: AnalyticFunction,
                 form: BilinearFormSpec, quad_degree: int = _ERROR_DEGREE) -> float:
    """Form-weighted error sqrt(sum_k c_k |u - u_h|_k^2)."""
    total = 0.0
    for order, c in form.terms():
        e = broken_error(dofmap, x, exact, order, form.convention, quad_degree)
        total += c * e * e
    return math.sqrt(total)


@dataclass(frozen=True)
class ErrorRecord:
    """Errors at one level; orders are vs. the previous record (None first)."""

    inv_h: int
    errors: tuple[float, float, float, float]
    orders: tuple[float | None, float | None, float | None, float | None]


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    return math.log(e_coarse / e_fine) / math.log(ratio)


def solve_case(case: ProblemCase, level: int, threads: int = 1,
               quad_degree: int | None = None):
    """Assemble and solve one level; returns (dofmap, solution, system)."""
    mesh = case.mesh(level)
    dofmap = build_global_dof_map(mesh, case.variant)
    a = assemble(dofmap, case.form, quad_degree=quad_degree, threads=threads)
    b = assemble_load(dofmap, case.load, threads=threads)
    constraints = classify_and_constrain(dofmap, case.bc)
    x = solve_constrained(a, b, constraints)
    return dofmap, x, (a, b, constraints)


def run_convergence_study(case: ProblemCase, levels, threads: int = 1,
                          quad_degree: int | None = None) -> list[ErrorRecord]:
    """Solve at each level and report errors/orders in H^0..H^3."""
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    records: list[ErrorRecord] = []
    prev: ErrorRecord | None = None
    for level in levels:
        dofmap, x, _ = solve_case(case, level, threads=threads,
                                  quad_degree=quad_degree)
        errs = tuple(broken_error(dofmap, x, case.exact, k,
                                  case.form.convention) for k in range(4))
        if prev is None:
            orders = (None, None, None, None)
        else:
            ratio = level / prev.inv_h
            orders = tuple(observed_order(pe, e, ratio)
                           for pe, e in zip(prev.errors, errs))
        rec = ErrorRecord(inv_h=level, errors=errs, orders=orders)
        records.append(rec)
        prev = rec
    return records
