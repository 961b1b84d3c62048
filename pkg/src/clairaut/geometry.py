"""Pointwise Riemannian geometry on a single global chart.

Points and vector components are plain float arrays.  Metric partials come
from the metric's analytic ``partials`` when available and from central
differences otherwise.  Derivatives of derived quantities (vector fields,
Christoffel symbols, gradients) use a five-point stencil with step
``FIELD_STEP * max(1, |p|_inf)`` so that two nested difference layers still
leave ~1e-8 accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateFrameError,
    DegeneratePlaneError,
    EvaluationError,
    NumericError,
    SingularMetricError,
)

FIELD_STEP = 1e-3
_CACHE_SIZE = 4096


def as_point(p, dim: int | None = None) -> np.ndarray:
    x = np.array(p, dtype=float).reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"point has {x.shape[0]} coordinates, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"point has non-finite coordinates: {x}")
    return x


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricField:
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derivative_step: float = 1e-6
    # optional postfix program (g entries then partials) for the compiled geodesic kernel
    program: object = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("metric dimension must be >= 1")
        if not self.derivative_step > 0:
            raise ValueError("derivative_step must be positive")

    def __call__(self, p) -> np.ndarray:
        try:
            g = np.asarray(self.eval(p), dtype=float).reshape(self.dim, self.dim)
        except EvaluationError as exc:
            raise SingularMetricError(f"metric undefined: {exc}", point=p) from None
        if not np.all(np.isfinite(g)):
            raise SingularMetricError("metric has non-finite entries", point=p)
        return g

    def derivatives(self, p) -> np.ndarray:
        """Array ``P[i, j, k] = dg_ij / dx_k``."""
        m = self.dim
        if self.partials is not None:
            P = np.asarray(self.partials(p), dtype=float).reshape(m, m, m)
            if not np.all(np.isfinite(P)):
                raise SingularMetricError("metric partials are non-finite", point=p)
            return P
        P = np.empty((m, m, m))
        for k in range(m):
            h = self.derivative_step * max(1.0, abs(p[k]))
            e = np.zeros(m)
            e[k] = h
            P[:, :, k] = (self(p + e) - self(p - e)) / (2.0 * h)
        return P


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        c = np.array(self.components, dtype=float).reshape(-1)
        if c.shape != self.base.shape:
            raise ValueError("components and base point differ in length")
        if not np.all(np.isfinite(c)):
            raise NumericError("tangent vector has non-finite components")
        object.__setattr__(self, "components", c)

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Smooth field given by its coordinate components; ``jacobian[k, i] = d_i X^k``."""

    eval: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p) -> np.ndarray:
        try:
            return np.asarray(self.eval(p), dtype=float).reshape(-1)
        except (ArithmeticError, ValueError) as exc:
            raise EvaluationError(f"field {self.name or '?'} failed at {list(p)}: {exc}") from None

    def at(self, p) -> TangentVector:
        p = as_point(p)
        return TangentVector(p, self(p))

    @classmethod
    def constant(cls, components, name: str = "const") -> "VectorField":
        c = np.array(components, dtype=float)
        return cls(lambda p: c, name, lambda p: np.zeros((c.size, c.size)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    eval: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, p) -> float:
        return float(self.eval(p))

    def differential(self, p) -> np.ndarray:
        """Coordinate differential ``(d_1 f, ..., d_m f)``."""
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float).reshape(-1)
        m = len(p)
        return np.array([directional_derivative(self, p, np.eye(m)[i]) for i in range(m)])

    @classmethod
    def constant(cls, value: float, name: str = "const") -> "ScalarField":
        return cls(lambda p: value, lambda p: np.zeros(len(p)), name)


@dataclass(frozen=True)
class ChristoffelTensor:
    at: np.ndarray
    values: np.ndarray  # [k, i, j]


@dataclass(frozen=True, eq=False)
class ChartManifold:
    dim: int
    metric: MetricField
    name: str = "M"
    _cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.metric.dim != self.dim:
            raise ValueError("manifold and metric dimensions disagree")
        self._cache["gamma"] = lru_cache(maxsize=_CACHE_SIZE)(self._christoffel_bytes)
        self._cache["riemann"] = lru_cache(maxsize=256)(self._riemann_bytes)

    def point(self, p) -> np.ndarray:
        return as_point(p, self.dim)

    def g(self, p) -> np.ndarray:
        return self.metric(self.point(p))

    def inverse_metric(self, p) -> np.ndarray:
        g = self.g(p)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise SingularMetricError("metric is not positive-definite", point=p) from None
        return np.linalg.inv(g)

    def _christoffel_bytes(self, key: bytes) -> np.ndarray:
        p = np.frombuffer(key, dtype=float).copy()
        ginv = self.inverse_metric(p)
        P = self.metric.derivatives(p)
        # Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
        lower = np.einsum("jli->ijl", P) + np.einsum("ilj->ijl", P) - P
        gam = 0.5 * np.einsum("kl,ijl->kij", ginv, lower)
        gam = 0.5 * (gam + gam.transpose(0, 2, 1))
        if not np.all(np.isfinite(gam)):
            raise SingularMetricError("non-finite Christoffel symbols", point=p)
        return _frozen(gam)

    def christoffel_values(self, p) -> np.ndarray:
        return self._cache["gamma"](self.point(p).tobytes())

    def _riemann_bytes(self, key: bytes) -> np.ndarray:
        p = np.frombuffer(key, dtype=float).copy()
        m = self.dim
        G = self.christoffel_values(p)
        dG = np.array([directional_derivative(self.christoffel_values, p, np.eye(m)[c]) for c in range(m)])
        R = (
            np.einsum("cadb->abcd", dG)
            - np.einsum("dacb->abcd", dG)
            + np.einsum("ace,edb->abcd", G, G)
            - np.einsum("ade,ecb->abcd", G, G)
        )
        return _frozen(R)

    def riemann_values(self, p) -> np.ndarray:
        """``R[a, b, c, d] = R^a_{bcd}`` with ``R(x, y)z = R^a_{bcd} z^b x^c y^d``."""
        return self._cache["riemann"](self.point(p).tobytes())


def directional_derivative(fn: Callable, p, u) -> np.ndarray:
    """d/ds fn(p + s u) at s = 0 by a five-point stencil."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    un = np.max(np.abs(u)) if u.size else 0.0
    f0 = np.asarray(fn(p), dtype=float)
    if un == 0.0:
        return np.zeros_like(f0)
    h = FIELD_STEP * max(1.0, float(np.max(np.abs(p)))) / un
    fp1 = np.asarray(fn(p + h * u), dtype=float)
    fm1 = np.asarray(fn(p - h * u), dtype=float)
    fp2 = np.asarray(fn(p + 2 * h * u), dtype=float)
    fm2 = np.asarray(fn(p - 2 * h * u), dtype=float)
    return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)


def _check_base(u: TangentVector, v: TangentVector):
    if u.base.shape != v.base.shape or not np.array_equal(u.base, v.base):
        raise ValueError("tangent vectors are based at different points")


def inner(man: ChartManifold, p, u, v) -> float:
    return float(np.asarray(u) @ man.g(p) @ np.asarray(v))


def metric_inner(man: ChartManifold, u: TangentVector, v: TangentVector) -> float:
    _check_base(u, v)
    if u.components.size != man.dim:
        raise ValueError("vector dimension does not match the manifold")
    val = inner(man, u.base, u.components, v.components)
    if not np.isfinite(val):
        raise NumericError("metric inner product is not finite")
    return val


def norm(man: ChartManifold, p, u) -> float:
    return float(np.sqrt(max(inner(man, p, u, u), 0.0)))


def christoffel(man: ChartManifold, p) -> ChristoffelTensor:
    p = man.point(p)
    return ChristoffelTensor(p, man.christoffel_values(p))


def connection_term(man: ChartManifold, p, u, w) -> np.ndarray:
    return np.einsum("kij,i,j->k", man.christoffel_values(p), u, w)


def nabla(man: ChartManifold, p, u, fn: Callable, jacobian: Optional[Callable] = None) -> np.ndarray:
    """Components of the covariant derivative of the field ``fn`` along ``u`` at ``p``."""
    p = man.point(p)
    u = np.asarray(u, dtype=float)
    if jacobian is not None:
        d = np.asarray(jacobian(p), dtype=float) @ u
    else:
        d = directional_derivative(fn, p, u)
    return d + connection_term(man, p, u, np.asarray(fn(p), dtype=float))


def covariant_derivative(man: ChartManifold, along: TangentVector, field: VectorField) -> TangentVector:
    p = along.base
    return TangentVector(p, nabla(man, p, along.components, field, field.jacobian))


def riemann_tensor(man: ChartManifold, p) -> np.ndarray:
    return man.riemann_values(p)


def riemann_curvature(man: ChartManifold, p, x: TangentVector, y: TangentVector, z: TangentVector) -> TangentVector:
    p = man.point(p)
    for w in (x, y, z):
        if not np.array_equal(w.base, p):
            raise ValueError("curvature arguments must be based at p")
    R = man.riemann_values(p)
    return TangentVector(p, np.einsum("abcd,b,c,d->a", R, z.components, x.components, y.components))


def curvature_form(man: ChartManifold, p, u, v) -> float:
    """g(R(u, v)v, u) on raw component arrays."""
    R = man.riemann_values(p)
    Ruvv = np.einsum("abcd,b,c,d->a", R, v, u, v)
    return inner(man, p, Ruvv, u)


def sectional(man: ChartManifold, p, u, v) -> float:
    g = man.g(p)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if den < 1e-14:
        raise DegeneratePlaneError(f"plane is degenerate (area^2 = {den:.3e})")
    return curvature_form(man, p, u, v) / den


def sectional_curvature(man: ChartManifold, p, u: TangentVector, v: TangentVector) -> float:
    _check_base(u, v)
    return sectional(man, u.base, u.components, v.components)


def gradient_components(man: ChartManifold, f: ScalarField, p) -> np.ndarray:
    p = man.point(p)
    return man.inverse_metric(p) @ f.differential(p)


def gradient(man: ChartManifold, f: ScalarField, p) -> TangentVector:
    p = man.point(p)
    return TangentVector(p, gradient_components(man, f, p))


def gradient_field(man: ChartManifold, f: ScalarField) -> VectorField:
    return VectorField(lambda p: gradient_components(man, f, p), f"grad {f.name}".strip())


def gram_schmidt(g: np.ndarray, vectors: Sequence, tol: float = 1e-12) -> list[np.ndarray]:
    """g-orthonormalize ``vectors`` in order (modified Gram-Schmidt, two passes)."""
    out: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for _ in range(2):
            for e in out:
                w = w - (e @ g @ w) * e
        n2 = w @ g @ w
        if not n2 > tol * tol:
            raise DegenerateFrameError(f"vector {len(out)} is dependent on its predecessors (norm {np.sqrt(max(n2, 0)):.3e})")
        out.append(w / np.sqrt(n2))
    return out


def orthonormal_frame(man: ChartManifold, p, order: Optional[Sequence[int]] = None) -> list[np.ndarray]:
    p = man.point(p)
    order = range(man.dim) if order is None else order
    axes = np.eye(man.dim)
    return gram_schmidt(man.g(p), [axes[i] for i in order])


def divergence(man: ChartManifold, field: VectorField, p, order: Optional[Sequence[int]] = None) -> float:
    """Trace of the covariant derivative of ``field`` over an orthonormal frame."""
    p = man.point(p)
    return float(sum(inner(man, p, nabla(man, p, e, field, field.jacobian), e) for e in orthonormal_frame(man, p, order)))


def laplacian(man: ChartManifold, f: ScalarField, p) -> float:
    return divergence(man, gradient_field(man, f), p)


def hessian(man: ChartManifold, f: ScalarField, u: TangentVector, v: TangentVector) -> float:
    _check_base(u, v)
    p = u.base
    grad = gradient_field(man, f)
    return inner(man, p, nabla(man, p, u.components, grad), v.components)


def lie_bracket(x: VectorField, y: VectorField, p) -> np.ndarray:
    """[X, Y]^k = X(Y^k) - Y(X^k)."""
    p = as_point(p)
    dy = y.jacobian(p) @ x(p) if y.jacobian is not None else directional_derivative(y, p, x(p))
    dx = x.jacobian(p) @ y(p) if x.jacobian is not None else directional_derivative(x, p, y(p))
    return dy - dx
