"""Assembly of broken bilinear forms and the constrained sparse solve.

The broken form is a weighted sum of cell-wise derivative products,

    c3 * sum_{|a|=3} (d^a u, d^a v)_T + c1 * (grad u, grad v)_T + c0 * (u, v)_T,

where the third-order sum runs over multi-indices once by default
("multiindex"); the "frobenius" convention weights mixed derivatives with
their multinomial multiplicity, which matches the derivative-tensor
contraction and hence the operator (-Laplace)^3.  Only the upper triangle
is stored and mirrored, so symmetry is exact by construction.

Threaded assembly computes local blocks over fixed contiguous chunks of
cells and concatenates them in chunk order, so the assembled matrix is
bitwise independent of the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import simplex_rule
from .tables import cell_ops

__all__ = [
    "BilinearFormSpec",
    "SparseSymmetricMatrix",
    "assemble",
    "assemble_load",
    "solve_constrained",
    "eigenvalue_range",
    "SolverError",
]

_CHUNK = 1024
_DEFAULT_STIFFNESS_DEGREE = {"wuxu": 8, "robust": 14}
_LOAD_DEGREE = 20


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class BilinearFormSpec:
    """Coefficients of the broken form and the mixed-derivative convention."""

    c3: float = 0.0
    c1: float = 0.0
    c0: float = 0.0
    convention: str = "multiindex"

    def __post_init__(self):
        if self.c3 < 0:
            raise ValueError("c3 must be nonnegative")
        if self.c3 == 0 and self.c1 == 0 and self.c0 == 0:
            raise ValueError("at least one form coefficient must be positive")
        if self.convention not in ("multiindex", "frobenius"):
            raise ValueError(f"unknown convention {self.convention!r}")

    def terms(self):
        return [(order, c) for order, c in ((3, self.c3), (1, self.c1),
                                            (0, self.c0)) if c != 0.0]


@dataclass
class SparseSymmetricMatrix:
    """Symmetric matrix stored as its upper triangle (diagonal included)."""

    dim: int
    upper: sp.csr_matrix

    def tocsr(self) -> sp.csr_matrix:
        full = self.upper + self.upper.T
        full -= sp.diags(self.upper.diagonal())
        return full.tocsr()

    def asymmetry(self) -> float:
        a = self.tocsr()
        return abs(a - a.T).max() if a.nnz else 0.0


def _local_matrix(variant, ctx, form: BilinearFormSpec, degree: int) -> np.ndarray:
    ops = cell_ops(variant, ctx)
    j = ops.element.num_dofs
    local = np.zeros((j, j))
    for order, c in form.terms():
        local += c * ops.local_stiffness(order, form.convention, degree)
    return local


def _assemble_chunk(dofmap, form, degree, cell_range):
    rows, cols, vals = [], [], []
    for ci in cell_range:
        ctx = dofmap.mesh.cell_context(ci)
        local = _local_matrix(dofmap.variant, ctx, form, degree)
        gdofs = dofmap.cell_dofs[ci]
        signs = dofmap.signs[ci]
        local = local * np.outer(signs, signs)
        gi = np.repeat(gdofs, len(gdofs))
        gj = np.tile(gdofs, len(gdofs))
        v = local.ravel()
        keep = gi <= gj
        rows.append(gi[keep])
        cols.append(gj[keep])
        vals.append(v[keep])
    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def assemble(dofmap, form: BilinearFormSpec, quad_degree: int | None = None,
             threads: int = 1) -> SparseSymmetricMatrix:
    """Assemble the broken form over all cells of the space."""
    degree = quad_degree or _DEFAULT_STIFFNESS_DEGREE[dofmap.variant]
    ncells = dofmap.mesh.num_cells
    chunks = [range(lo, min(lo + _CHUNK, ncells))
              for lo in range(0, ncells, _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda r: _assemble_chunk(dofmap, form, degree, r), chunks))
    else:
        parts = [_assemble_chunk(dofmap, form, degree, r) for r in chunks]
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    n = dofmap.num_dofs
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    upper.sum_duplicates()
    return SparseSymmetricMatrix(dim=n, upper=upper)


def assemble_load(dofmap, f, quad_degree: int = _LOAD_DEGREE,
                  threads: int = 1) -> np.ndarray:
    """Load vector b[g] = sum_T int_T f p_g; f maps points (m,2) to (m,)."""
    b = np.zeros(dofmap.num_dofs)
    if f is None:
        return b
    mesh = dofmap.mesh
    rule = simplex_rule(mesh.dim, quad_degree)

    def chunk_load(cell_range):
        part = np.zeros(dofmap.num_dofs)
        for ci in cell_range:
            ctx = mesh.cell_context(ci)
            ops = cell_ops(dofmap.variant, ctx)
            pts = rule.points @ ctx.geometry.vertices
            fw = rule.weights * np.asarray(f(pts), dtype=float)
            local = ops.scale * (ops.nodal_values(rule) @ fw)
            np.add.at(part, dofmap.cell_dofs[ci], dofmap.signs[ci] * local)
        return part

    ncells = mesh.num_cells
    chunks = [range(lo, min(lo + _CHUNK, ncells))
              for lo in range(0, ncells, _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk_load, chunks))
    else:
        parts = [chunk_load(r) for r in chunks]
    for part in parts:
        b += part
    return b


def solve_constrained(matrix: SparseSymmetricMatrix, b: np.ndarray,
                      constraints) -> np.ndarray:
    """Eliminate constrained DOFs and solve the free block.

    The free block is symmetrically Jacobi-scaled, factorized with sparse
    LU, and the solution is refined until the relative residual drops
    below 1e-12 (direct solve); a diagonally preconditioned CG is the
    fallback if the factorization fails.
    """
    a = matrix.tocsr()
    x = np.zeros(matrix.dim)
    constraints.apply_to(x)
    free = constraints.free
    if free.size == 0:
        return x
    rhs = b[free] - a[free][:, constraints.indices] @ constraints.values
    aff = a[free][:, free].tocsr()
    diag = aff.diagonal()
    if np.any(diag <= 0):
        raise SolverError("free block has nonpositive diagonal entries; "
                          "the constrained form is not positive definite")
    s = 1.0 / np.sqrt(diag)
    scaled = sp.diags(s) @ aff @ sp.diags(s)
    rhs_s = s * rhs
    try:
        lu = spla.splu(scaled.tocsc())
        y = lu.solve(rhs_s)
        norm_rhs = np.linalg.norm(rhs_s)
        if norm_rhs > 0:
            for _ in range(5):
                r = rhs_s - scaled @ y
                if np.linalg.norm(r) <= 1e-12 * norm_rhs:
                    break
                y = y + lu.solve(r)
    except RuntimeError as exc:
        cond_hint = float(diag.max() / diag.min())
        y, info = spla.cg(scaled, rhs_s, rtol=1e-12, atol=0.0,
                          maxiter=20 * scaled.shape[0])
        if info != 0:
            raise SolverError(
                f"direct factorization failed ({exc}) and CG stalled "
                f"(info={info}, diag ratio {cond_hint:.2e})") from exc
    x[free] = s * y
    return x


def eigenvalue_range(matrix: SparseSymmetricMatrix, free: np.ndarray):
    """Smallest and largest eigenvalue of the free block."""
    aff = matrix.tocsr()[free][:, free]
    n = aff.shape[0]
    if n <= 2500:
        import scipy.linalg as la

        ev = la.eigvalsh(aff.toarray())
        return float(ev[0]), float(ev[-1])
    lo = spla.eigsh(aff, k=1, sigma=0, which="LM",
                    return_eigenvectors=False)[0]
    hi = spla.eigsh(aff, k=1, which="LA", return_eigenvectors=False)[0]
    return float(lo), float(hi)
