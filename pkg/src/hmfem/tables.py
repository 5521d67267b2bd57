"""Vectorized per-cell operator tables with geometry-keyed caching.

Assembly and error evaluation repeatedly need values of nodal-basis
derivatives at reference quadrature points.  Those depend on the cell only
through its edge vectors and the relative order of its global vertex ids,
so cells are grouped by a canonical signature (offsets rounded to 12
decimals plus the id-rank pattern); structured meshes collapse to two
groups.  All cached quantities are computed from the canonical geometry,
which keeps results bitwise independent of which cell populates the cache.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .element import nodal_basis
from .mesh import CellContext
from .polyspace import BarycentricPolynomial
from .quadrature import QuadratureRule, simplex_rule

__all__ = [
    "VariantTables",
    "variant_tables",
    "CellOps",
    "cell_ops",
    "cell_signature",
    "order_alphas",
]


def order_alphas(dim: int, order: int, convention: str):
    """Cartesian multi-indices of a broken form term, with their weights.

    ``multiindex`` sums each multi-index once (the standard Sobolev
    seminorm); ``frobenius`` weights mixed derivatives with multinomial
    multiplicity, matching the full derivative-tensor contraction.
    """
    if convention not in ("multiindex", "frobenius"):
        raise ValueError(f"unknown convention {convention!r}")
    out = []
    for alpha in itertools.product(range(order + 1), repeat=dim):
        if sum(alpha) != order:
            continue
        w = 1.0
        if convention == "frobenius":
            w = math.factorial(order)
            for a in alpha:
                w /= math.factorial(a)
        out.append((alpha, w))
    out.sort(key=lambda t: t[0], reverse=True)
    return out


class VariantTables:
    """Monomial exponent table, basis coefficients, derivative operators."""

    def __init__(self, variant: str, dim: int):
        from .element import shape_basis

        self.variant = variant
        self.dim = dim
        self.basis = shape_basis(variant, dim)
        nv = self.basis.nvars
        maxdeg = self.basis.max_degree()
        exps = sorted(
            (b for b in itertools.product(range(maxdeg + 1), repeat=nv)
             if sum(b) <= maxdeg),
            key=lambda b: (sum(b), b))
        self.exponents = np.array(exps, dtype=np.int64)
        self.index = {b: i for i, b in enumerate(exps)}
        self.num_monomials = len(exps)
        self.coeffs = np.zeros((self.basis.dimension, self.num_monomials))
        for i, p in enumerate(self.basis.polys):
            for beta, c in p.terms.items():
                self.coeffs[i, self.index[beta]] = c
        self._lambda_diff: list[np.ndarray] = []
        for v in range(nv):
            m = np.zeros((self.num_monomials, self.num_monomials))
            for i, beta in enumerate(exps):
                dmono = BarycentricPolynomial.monomial(beta).lambda_derivative(v)
                for b2, c in dmono.terms.items():
                    m[i, self.index[b2]] = c
            self._lambda_diff.append(m)
        self._gamma_cache: dict[tuple[int, ...], np.ndarray] = {}
        self._mono_cache: dict[tuple, np.ndarray] = {}

    def lambda_diff_matrix(self, gamma: tuple[int, ...]) -> np.ndarray:
        """Operator of the barycentric derivative d^gamma on coefficient rows."""
        m = self._gamma_cache.get(gamma)
        if m is None:
            m = np.eye(self.num_monomials)
            for v, count in enumerate(gamma):
                for _ in range(count):
                    m = m @ self._lambda_diff[v]
            self._gamma_cache[gamma] = m
        return m

    def cartesian_diff_matrix(self, bary_grads: np.ndarray,
                              alpha: tuple[int, ...]) -> np.ndarray:
        """Operator of the Cartesian derivative d^alpha on one cell."""
        nv = self.basis.nvars
        axes = [d for d, a in enumerate(alpha) for _ in range(a)]
        weights: dict[tuple[int, ...], float] = {}
        for combo in itertools.product(range(nv), repeat=len(axes)):
            c = 1.0
            for t, lam in enumerate(combo):
                c *= bary_grads[lam, axes[t]]
            if c != 0.0:
                gamma = [0] * nv
                for lam in combo:
                    gamma[lam] += 1
                gamma = tuple(gamma)
                weights[gamma] = weights.get(gamma, 0.0) + c
        m = np.zeros((self.num_monomials, self.num_monomials))
        for gamma, c in weights.items():
            m += c * self.lambda_diff_matrix(gamma)
        return m

    def monomial_values(self, points: np.ndarray, cache_key=None) -> np.ndarray:
        """Values of all monomials at barycentric points: (n_mono, m)."""
        if cache_key is not None and cache_key in self._mono_cache:
            return self._mono_cache[cache_key]
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.ones((self.num_monomials, pts.shape[0]))
        for v in range(self.basis.nvars):
            vals *= pts[None, :, v] ** self.exponents[:, None, v]
        if cache_key is not None:
            self._mono_cache[cache_key] = vals
        return vals

    def rule_values(self, rule: QuadratureRule) -> np.ndarray:
        return self.monomial_values(rule.points, cache_key=(rule.dim, rule.degree))


@lru_cache(maxsize=None)
def variant_tables(variant: str, dim: int) -> VariantTables:
    return VariantTables(variant, dim)


def cell_signature(variant: str, cell: CellContext):
    offsets = cell.geometry.vertices[1:] - cell.geometry.vertices[0]
    ids = np.asarray(cell.vertex_ids)
    pattern = tuple(int(r) for r in np.argsort(np.argsort(ids, kind="stable"),
                                               kind="stable"))
    return (variant, cell.dim, pattern,
            tuple(np.round(offsets, 12).ravel().tolist()))


class CellOps:
    """Cached nodal-basis tables for one canonical cell geometry."""

    def __init__(self, variant: str, dim: int, pattern, offsets):
        self.tables = variant_tables(variant, dim)
        coords = np.vstack([np.zeros(dim),
                            np.asarray(offsets, dtype=float).reshape(dim, dim)])
        self.cell = CellContext(pattern, coords)
        self.element = nodal_basis(variant, self.cell)
        # row j = monomial coefficients of nodal polynomial p_j
        self.nodal_coeffs = self.element.coeffs.T @ self.tables.coeffs
        self.volume = self.cell.geometry.volume
        self.scale = self.volume * math.factorial(dim)
        self._deriv_vals: dict[tuple, np.ndarray] = {}
        self._poly_ops: dict[tuple, np.ndarray] = {}
        self._stiff: dict[tuple, np.ndarray] = {}
        self._nodal_vals: dict[tuple, np.ndarray] = {}

    def derivative_operator(self, alpha: tuple[int, ...],
                            rule: QuadratureRule) -> np.ndarray:
        """(n_mono, m) map from monomial coefficients to d^alpha values."""
        key = (alpha, rule.dim, rule.degree)
        op = self._poly_ops.get(key)
        if op is None:
            m = self.tables.cartesian_diff_matrix(self.cell.geometry.bary_grads,
                                                  alpha)
            op = m @ self.tables.rule_values(rule)
            self._poly_ops[key] = op
        return op

    def nodal_derivative_values(self, alpha: tuple[int, ...],
                                rule: QuadratureRule) -> np.ndarray:
        """(J, m) values of d^alpha of every nodal basis function."""
        key = (alpha, rule.dim, rule.degree)
        vals = self._deriv_vals.get(key)
        if vals is None:
            vals = self.nodal_coeffs @ self.derivative_operator(alpha, rule)
            self._deriv_vals[key] = vals
        return vals

    def nodal_values(self, rule: QuadratureRule) -> np.ndarray:
        key = (rule.dim, rule.degree)
        vals = self._nodal_vals.get(key)
        if vals is None:
            vals = self.nodal_coeffs @ self.tables.rule_values(rule)
            self._nodal_vals[key] = vals
        return vals

    def local_stiffness(self, order: int, convention: str,
                        degree: int) -> np.ndarray:
        """Local matrix of sum_{|alpha|=order} int_T d^a p_i d^a p_j."""
        key = (order, convention, degree)
        s = self._stiff.get(key)
        if s is None:
            rule = simplex_rule(self.cell.dim, degree)
            j = self.element.num_dofs
            s = np.zeros((j, j))
            for alpha, w in order_alphas(self.cell.dim, order, convention):
                dv = self.nodal_derivative_values(alpha, rule)
                s += (w * self.scale) * ((dv * rule.weights) @ dv.T)
            s = 0.5 * (s + s.T)
            self._stiff[key] = s
        return s


_CELL_OPS_CACHE: dict[tuple, CellOps] = {}


def cell_ops(variant: str, cell: CellContext) -> CellOps:
    """Shared cache lookup; results depend only on the canonical signature."""
    key = cell_signature(variant, cell)
    ops = _CELL_OPS_CACHE.get(key)
    if ops is None:
        ops = CellOps(variant, cell.dim, key[2], key[3])
        _CELL_OPS_CACHE[key] = ops
    return ops
