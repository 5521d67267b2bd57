"""Exact-to-degree quadrature on reference simplices and their facets.

Rules live in barycentric coordinates on the reference n-simplex, with
weights summing to the reference volume 1/n!.  Segments use Gauss-Legendre;
triangles and tetrahedra use the Grundmann-Moller construction

    A. Grundmann and H. M. Moller, Invariant integration formulas for the
    n-simplex by combinatorial methods, SIAM J. Numer. Anal. 15 (1978).

Grundmann-Moller weights alternate in sign; only exactness is promised.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureRule",
    "simplex_rule",
    "reference_volume",
    "integrate_on_cell",
    "integrate_on_facet",
    "barycentric_moment",
]

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    dim: int
    degree: int                 # exact for total degree <= degree
    points: np.ndarray          # (m, dim+1) barycentric coordinates
    weights: np.ndarray         # (m,), sum = 1/dim!

    @property
    def num_points(self) -> int:
        return self.points.shape[0]


def reference_volume(dim: int) -> float:
    return 1.0 / math.factorial(dim)


def barycentric_moment(beta, dim: int) -> float:
    """Exact integral of the barycentric monomial over the reference simplex.

    integral_T lambda^beta dx = |T| * n! * prod(beta_i!) / (n + |beta|)!
    with |T| = 1/n! on the reference simplex.
    """
    beta = tuple(int(b) for b in beta)
    num = 1
    for b in beta:
        num *= math.factorial(b)
    return num / math.factorial(dim + sum(beta))


def _gauss_legendre(degree: int) -> QuadratureRule:
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    t = (x + 1.0) / 2.0
    w = w / 2.0
    points = np.column_stack([1.0 - t, t])
    return QuadratureRule(dim=1, degree=2 * npts - 1, points=points, weights=w)


def _grundmann_moller(dim: int, degree: int) -> QuadratureRule:
    s = degree // 2  # smallest s with 2s+1 >= degree
    d = 2 * s + 1
    n = dim
    acc: dict[tuple[Fraction, ...], Fraction] = {}
    for i in range(s + 1):
        w = (Fraction(-1) ** i) * Fraction((d + n - 2 * i) ** d,
                                           4 ** s * math.factorial(i)
                                           * math.factorial(d + n - i))
        denom = d + n - 2 * i
        for beta in _compositions(s - i, n + 1):
            pt = tuple(Fraction(2 * b + 1, denom) for b in beta)
            acc[pt] = acc.get(pt, Fraction(0)) + w
    pts = np.array([[float(c) for c in p] for p in sorted(acc)])
    wts = np.array([float(acc[p]) for p in sorted(acc)])
    return QuadratureRule(dim=dim, degree=d, points=pts, weights=wts)


def _compositions(total: int, parts: int):
    """All tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Quadrature rule on the reference `dim`-simplex, exact to `degree`."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in 0..{MAX_DEGREE}, got {degree}")
    if dim == 1:
        return _gauss_legendre(degree)
    return _grundmann_moller(dim, degree)


def integrate_on_cell(rule: QuadratureRule, integrand, geometry) -> float:
    """Integrate over a cell; `integrand` maps physical points (m,n) to (m,)."""
    if rule.dim != geometry.dim:
        raise ValueError("rule dimension does not match cell dimension")
    pts = rule.points @ geometry.vertices
    vals = np.asarray(integrand(pts), dtype=float)
    scale = geometry.volume / reference_volume(rule.dim)
    return float(scale * (rule.weights @ vals))


def integrate_on_facet(rule: QuadratureRule, integrand, facet_vertices) -> float:
    """Integrate over a facet simplex given by its vertex coordinates."""
    from .mesh import facet_measure

    coords = np.asarray(facet_vertices, dtype=float)
    d = coords.shape[0] - 1
    if rule.dim != d:
        raise ValueError("rule dimension does not match facet dimension")
    pts = rule.points @ coords
    vals = np.asarray(integrand(pts), dtype=float)
    scale = facet_measure(coords) / reference_volume(d)
    return float(scale * (rule.weights @ vals))
