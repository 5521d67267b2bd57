"""Barycentric polynomial algebra and the element shape-space bases.

Polynomials are sparse sums of barycentric monomials lambda^beta.  The
coordinates are redundant (the lambdas sum to one), so a spanning set for
the full polynomial space P_d is chosen by taking every monomial in
lambda_1..lambda_n of degree <= d and lifting it to homogeneous degree d
with a power of lambda_{n+1}.  Differentiation in a Cartesian direction
uses the constant barycentric gradients of the cell and is exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import barycentric_moment

__all__ = [
    "MultiIndex",
    "BarycentricPolynomial",
    "ShapeSpaceBasis",
    "wuxu_basis",
    "robust_basis",
    "bubble",
    "differentiate",
    "directional_derivative",
    "cartesian_derivative",
    "evaluate",
    "evaluate_cartesian_derivative",
]


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector with |alpha| and the A_k membership test."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError("multi-index entries must be nonnegative")

    @property
    def order(self) -> int:
        return sum(self.exponents)

    def in_a_k(self, k: int) -> bool:
        """True iff all entries beyond the first k vanish."""
        return sum(self.exponents[k:]) == 0


class BarycentricPolynomial:
    """Sparse polynomial in the n+1 barycentric coordinates of a simplex."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], float] = {}
        if terms:
            for beta, c in terms.items():
                if c != 0.0:
                    self.terms[tuple(beta)] = self.terms.get(tuple(beta), 0.0) + c
            self.terms = {b: c for b, c in self.terms.items() if c != 0.0}

    @classmethod
    def monomial(cls, beta, coeff: float = 1.0) -> "BarycentricPolynomial":
        beta = tuple(int(b) for b in beta)
        return cls(len(beta), {beta: float(coeff)})

    @classmethod
    def zero(cls, nvars: int) -> "BarycentricPolynomial":
        return cls(nvars)

    def degree(self) -> int:
        return max((sum(b) for b in self.terms), default=0)

    def __add__(self, other):
        out = dict(self.terms)
        for b, c in other.terms.items():
            out[b] = out.get(b, 0.0) + c
        return BarycentricPolynomial(self.nvars, out)

    def __sub__(self, other):
        out = dict(self.terms)
        for b, c in other.terms.items():
            out[b] = out.get(b, 0.0) - c
        return BarycentricPolynomial(self.nvars, out)

    def __mul__(self, other):
        if isinstance(other, BarycentricPolynomial):
            out: dict[tuple[int, ...], float] = {}
            for b1, c1 in self.terms.items():
                for b2, c2 in other.terms.items():
                    b = tuple(x + y for x, y in zip(b1, b2))
                    out[b] = out.get(b, 0.0) + c1 * c2
            return BarycentricPolynomial(self.nvars, out)
        return BarycentricPolynomial(
            self.nvars, {b: c * float(other) for b, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def lambda_derivative(self, i: int) -> "BarycentricPolynomial":
        """Partial derivative with respect to barycentric coordinate i."""
        out: dict[tuple[int, ...], float] = {}
        for beta, c in self.terms.items():
            if beta[i] > 0:
                b = list(beta)
                b[i] -= 1
                b = tuple(b)
                out[b] = out.get(b, 0.0) + c * beta[i]
        return BarycentricPolynomial(self.nvars, out)

    def evaluate(self, bary) -> np.ndarray | float:
        pts = np.asarray(bary, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        vals = np.zeros(pts.shape[0])
        for beta, c in self.terms.items():
            mono = np.ones(pts.shape[0])
            for v, e in enumerate(beta):
                if e:
                    mono *= pts[:, v] ** e
            vals += c * mono
        return float(vals[0]) if single else vals

    def reference_integral(self, dim: int) -> float:
        """Exact integral over the reference simplex (closed-form moments)."""
        return sum(c * barycentric_moment(b, dim) for b, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*l^{b}" for b, c in sorted(self.terms.items())]
        return " ".join(parts) if parts else "0"


def differentiate(p: BarycentricPolynomial, direction, geometry) -> BarycentricPolynomial:
    """Exact derivative of p along a Cartesian direction on the given cell."""
    direction = np.asarray(direction, dtype=float)
    coefs = geometry.bary_grads @ direction        # direction . grad(lambda_i)
    out = BarycentricPolynomial.zero(p.nvars)
    for i, c in enumerate(coefs):
        if c != 0.0:
            out = out + c * p.lambda_derivative(i)
    return out


directional_derivative = differentiate


def cartesian_derivative(p: BarycentricPolynomial, alpha, geometry) -> BarycentricPolynomial:
    """Repeated axis derivatives: alpha is a multi-index over x_1..x_n."""
    out = p
    for axis, count in enumerate(alpha):
        e = np.zeros(geometry.dim)
        e[axis] = 1.0
        for _ in range(count):
            out = differentiate(out, e, geometry)
    return out


def evaluate(p: BarycentricPolynomial, bary):
    return p.evaluate(bary)


def evaluate_cartesian_derivative(p, alpha, geometry, bary):
    return cartesian_derivative(p, alpha, geometry).evaluate(bary)


def bubble(nvars: int) -> BarycentricPolynomial:
    """Volume bubble: the product of all barycentric coordinates."""
    return BarycentricPolynomial.monomial((1,) * nvars)


@dataclass(frozen=True)
class ShapeSpaceBasis:
    variant: str
    dim: int
    polys: tuple[BarycentricPolynomial, ...]

    @property
    def dimension(self) -> int:
        return len(self.polys)

    @property
    def nvars(self) -> int:
        return self.dim + 1

    def max_degree(self) -> int:
        return max(p.degree() for p in self.polys)


def _lifted_monomials(n: int, degree: int) -> list[BarycentricPolynomial]:
    """Basis of P_degree: monomials in lambda_1..lambda_n lifted to homogeneous form.

    Ordering is frozen to graded lexicographic in the reduced exponents.
    """
    out = []
    combos = [b for d in range(degree + 1)
              for b in itertools.product(range(degree + 1), repeat=n) if sum(b) == d]
    combos.sort(key=lambda b: (sum(b), b))
    for b in combos:
        beta = b + (degree - sum(b),)
        out.append(BarycentricPolynomial.monomial(beta))
    return out


def _check_independence(basis: ShapeSpaceBasis, expected: int):
    if basis.dimension != expected:
        raise AssertionError(
            f"{basis.variant}: got {basis.dimension} basis members, expected {expected}")
    gram = np.empty((expected, expected))
    for i, pi in enumerate(basis.polys):
        for j in range(i, expected):
            gram[i, j] = gram[j, i] = (pi * basis.polys[j]).reference_integral(basis.dim)
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 1e-12 * ev[-1]:
        raise AssertionError(f"{basis.variant}: basis numerically dependent")


@lru_cache(maxsize=None)
def wuxu_basis(n: int) -> ShapeSpaceBasis:
    """Shape space P_{n+1} + bubble * P_1 on an n-simplex, n = 1..3.

    The dimension is C(2n+1, n) + n; the bubble itself already lies in
    P_{n+1}, so only the n products bubble*lambda_j are appended.
    """
    if n not in (1, 2, 3):
        raise ValueError("supported dimensions are 1..3")
    polys = _lifted_monomials(n, n + 1)
    q = bubble(n + 1)
    for j in range(n):
        lj = BarycentricPolynomial.monomial(tuple(1 if v == j else 0
                                                  for v in range(n + 1)))
        polys.append(q * lj)
    basis = ShapeSpaceBasis("wuxu", n, tuple(polys))
    _check_independence(basis, math.comb(2 * n + 1, n) + n)
    return basis


@lru_cache(maxsize=None)
def robust_basis() -> ShapeSpaceBasis:
    """2D shape space P_3 + bubble * P_1 + bubble^2 * P_1 (dimension 15)."""
    polys = _lifted_monomials(2, 3)
    q = bubble(3)
    l1 = BarycentricPolynomial.monomial((1, 0, 0))
    l2 = BarycentricPolynomial.monomial((0, 1, 0))
    polys.extend([q * l1, q * l2, q * q, q * q * l1, q * q * l2])
    basis = ShapeSpaceBasis("robust", 2, tuple(polys))
    _check_independence(basis, 15)
    return basis
