"""Scalar fields, vector fields, and Riemannian metrics on a single R^n chart.

Everything downstream works with a :class:`DissipativeSystem`: a conservative
vector field X, a list of conserved quantities, one quantity to be dissipated,
and a metric. Gradients are metric gradients, i.e. the solve g(x) u = df(x).
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteValue,
    NonPositiveDefiniteMetric,
)

# Central-difference step follows the usual cube-root-of-eps rule, scaled per
# coordinate so large coordinates do not lose all their significant digits.
_CBRT_EPS = float(np.cbrt(np.finfo(float).eps))


def as_point(x, dim: int) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (dim,):
        raise DimensionMismatch(f"expected a point of dimension {dim}, got shape {p.shape}")
    return p


def central_difference(value: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Second-order central differences, step cbrt(eps) * max(1, |x_i|)."""
    out = np.empty(x.size)
    for i in range(x.size):
        h = _CBRT_EPS * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (float(value(xp)) - float(value(xm))) / (2.0 * h)
    return out


@dataclass(frozen=True)
class ScalarField:
    """Smooth scalar function with an optional analytic differential.

    When ``differential`` is None the differential falls back to central
    finite differences; one-sided differences are never used.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    differential: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __call__(self, x) -> float:
        return float(self.value(as_point(x, self.dim)))

    def d(self, x) -> np.ndarray:
        p = as_point(x, self.dim)
        if self.differential is None:
            return central_difference(self.value, p)
        df = np.asarray(self.differential(p), dtype=float)
        if df.shape != (self.dim,):
            raise DimensionMismatch(
                f"differential of {self.label or 'field'} returned shape {df.shape}"
            )
        return df


@dataclass(frozen=True)
class VectorField:
    """Vector field on the chart; evaluation must be deterministic."""

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        v = np.asarray(self.func(as_point(x, self.dim)), dtype=float)
        if v.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector field {self.label or ''} returned shape {v.shape}"
            )
        return v


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric given by its matrix in chart coordinates.

    The raw matrix is symmetrized on evaluation; positive definiteness is
    checked with a Cholesky factorization and violations are errors.
    """

    dim: int
    matrix: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def at(self, x) -> np.ndarray:
        p = as_point(x, self.dim)
        raw = np.asarray(self.matrix(p), dtype=float)
        if raw.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"metric returned shape {raw.shape}")
        sym = 0.5 * (raw + raw.T)
        try:
            np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise NonPositiveDefiniteMetric(
                f"metric not positive definite at {p.tolist()}"
            ) from exc
        return sym

    @staticmethod
    def euclidean(dim: int) -> "MetricField":
        eye = np.eye(dim)
        return MetricField(dim, lambda _x: eye, label="euclidean")

    @staticmethod
    def constant(mat) -> "MetricField":
        m = np.asarray(mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"constant metric must be square, got {m.shape}")
        return MetricField(m.shape[0], lambda _x: m, label="constant")


def gradient(f: ScalarField, metric: MetricField, x) -> np.ndarray:
    """Metric gradient: the solution u of g(x) u = df(x)."""
    p = as_point(x, f.dim)
    df = f.d(p)
    if not np.all(np.isfinite(df)):
        raise NonFiniteValue(f"differential of {f.label or 'field'} not finite at {p.tolist()}")
    gmat = metric.at(p)
    return np.linalg.solve(gmat, df)


def inner(metric: MetricField, x, u, v) -> float:
    """Metric inner product of two tangent vectors at x."""
    p = as_point(x, metric.dim)
    uu = as_point(u, metric.dim)
    vv = as_point(v, metric.dim)
    return float(uu @ metric.at(p) @ vv)


@dataclass
class DissipativeSystem:
    """Conservative field X plus conserved quantities, a dissipated quantity, and a metric.

    The count of conserved quantities may be zero (pure gradient descent of
    the dissipated quantity) and must stay below the ambient dimension.
    """

    X: VectorField
    conserved: tuple[ScalarField, ...]
    dissipated: ScalarField
    metric: MetricField
    conservation_checked: bool = False

    def __post_init__(self):
        self.conserved = tuple(self.conserved)
        dims = {self.X.dim, self.dissipated.dim, self.metric.dim}
        dims.update(f.dim for f in self.conserved)
        if len(dims) != 1:
            raise DimensionMismatch(f"inconsistent dimensions in system: {sorted(dims)}")
        if not (0 <= self.k <= self.dim - 1):
            raise DimensionMismatch(
                f"need 0 <= k <= dim-1, got k={self.k} with dim={self.dim}"
            )

    @property
    def dim(self) -> int:
        return self.X.dim

    @property
    def k(self) -> int:
        return len(self.conserved)

    def all_fields(self) -> tuple[ScalarField, ...]:
        """Conserved fields followed by the dissipated one."""
        return self.conserved + (self.dissipated,)

    def leaf_value(self, x) -> np.ndarray:
        """Values of the conserved quantities at x (length k)."""
        p = as_point(x, self.dim)
        return np.array([f(p) for f in self.conserved])


@dataclass(frozen=True)
class ConservationReport:
    """Residuals of directional derivatives of the invariants along X."""

    residuals: dict
    max_residual: float
    tol: float
    passed: bool


def validate_conservation(system: DissipativeSystem, probes: Sequence,
                          tol: float = 1e-12) -> ConservationReport:
    """Check that X annihilates every conserved quantity and the dissipated one.

    The residual at a probe point is |df(x) . X(x)|, the derivative of f along
    the unperturbed flow. Sets ``system.conservation_checked`` on success.
    """
    fields_ = system.all_fields()
    names = [f.label or f"field{i}" for i, f in enumerate(fields_)]
    worst = {name: 0.0 for name in names}
    for x in probes:
        p = as_point(x, system.dim)
        vx = system.X(p)
        for name, f in zip(names, fields_):
            r = abs(float(f.d(p) @ vx))
            if r > worst[name]:
                worst[name] = r
    max_res = max(worst.values()) if worst else 0.0
    passed = max_res <= tol
    system.conservation_checked = passed
    return ConservationReport(residuals=worst, max_residual=max_res, tol=tol, passed=passed)
