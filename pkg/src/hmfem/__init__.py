"""Nonconforming simplicial finite elements for high-order elliptic problems.

The library provides a family of bubble-enriched elements whose global
spaces are glued through averaged-derivative degrees of freedom, a robust
2D variant for mixed normal-derivative boundary conditions, and the
machinery to run sixth-order (tri-harmonic) convergence studies against
manufactured solutions.
"""

from .assembly import (
    BilinearFormSpec,
    SparseSymmetricMatrix,
    assemble,
    assemble_load,
    eigenvalue_range,
    solve_constrained,
)
from .element import (
    DofFunctional,
    FiniteElement,
    apply_dof,
    build_dof_set,
    check_unisolvency,
    dof_matrix,
    local_interpolate,
    nodal_basis,
)
from .fespace import (
    BoundaryConditionSpec,
    GlobalDofMap,
    build_global_dof_map,
    classify_and_constrain,
    interpolate_global,
    verify_face_average_continuity,
)
from .mesh import (
    FacetFrame,
    SimplicialMesh,
    SubSimplex,
    enumerate_subsimplices,
    facet_frame,
    generate_lshape_mesh,
    generate_unit_square_mesh,
)
from .polyspace import (
    BarycentricPolynomial,
    MultiIndex,
    ShapeSpaceBasis,
    robust_basis,
    wuxu_basis,
)
from .problems import (
    AnalyticFunction,
    ErrorRecord,
    ProblemCase,
    broken_error,
    example1,
    example2,
    perturbed_sweep_case,
    robust_case,
    run_convergence_study,
)
from .quadrature import QuadratureRule, integrate_on_cell, integrate_on_facet, simplex_rule

__version__ = "0.1.0"
