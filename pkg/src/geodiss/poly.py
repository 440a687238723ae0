"""Multivariate polynomials with exact differentials.

Used for the seeded random test systems and for systems defined inline in a
run configuration, where analytic derivatives keep identity residuals at
roundoff level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Sum of monomials c * x1^p1 * ... * xn^pn.

    powers : (terms, dim) integer exponent matrix
    coefs  : (terms,) coefficients
    """

    powers: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        pw = np.asarray(self.powers, dtype=int)
        cf = np.asarray(self.coefs, dtype=float)
        if pw.ndim != 2 or cf.shape != (pw.shape[0],):
            raise DimensionMismatch(
                f"powers {pw.shape} and coefs {cf.shape} do not line up"
            )
        object.__setattr__(self, "powers", pw)
        object.__setattr__(self, "coefs", cf)

    @property
    def dim(self) -> int:
        return self.powers.shape[1]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"point shape {x.shape}, expected ({self.dim},)")
        return float(np.prod(x ** self.powers, axis=1) @ self.coefs)

    def diff(self, x) -> np.ndarray:
        """Exact differential at x, as a length-dim array of partials."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"point shape {x.shape}, expected ({self.dim},)")
        out = np.zeros(self.dim)
        for j in range(self.dim):
            pj = self.powers[:, j]
            sel = pj > 0
            if not sel.any():
                continue
            lowered = self.powers[sel].copy()
            lowered[:, j] -= 1
            out[j] = np.sum(self.coefs[sel] * pj[sel] * np.prod(x ** lowered, axis=1))
        return out

    @staticmethod
    def from_terms(dim: int, terms) -> "Polynomial":
        """Build from an iterable of (coef, powers) pairs."""
        terms = list(terms)
        if not terms:
            return Polynomial(np.zeros((0, dim), dtype=int), np.zeros(0))
        pw = np.array([list(p) for _, p in terms], dtype=int)
        if pw.shape[1] != dim:
            raise DimensionMismatch(f"terms have {pw.shape[1]} exponents, dim is {dim}")
        cf = np.array([c for c, _ in terms], dtype=float)
        return Polynomial(pw, cf)


def all_monomials(dim: int, max_degree: int) -> np.ndarray:
    """Exponent rows for every monomial with 1 <= total degree <= max_degree."""
    rows = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            if sum(prefix) > 0:
                rows.append(list(prefix))
            return
        for e in range(budget + 1):
            rec(prefix + [e], remaining - 1, budget - e)

    rec([], dim, max_degree)
    return np.array(rows, dtype=int)


def random_polynomial(dim: int, max_degree: int, rng: np.random.Generator,
                      scale: float = 1.0) -> Polynomial:
    """Dense random polynomial with N(0, scale^2) coefficients, zero constant term."""
    powers = all_monomials(dim, max_degree)
    coefs = rng.normal(0.0, scale, size=powers.shape[0])
    return Polynomial(powers, coefs)
