"""Smooth submersions F: (M, g) -> (B, g'): vertical/horizontal splits, dilation,
O'Neill tensors, mean curvature, second fundamental form and tension field.

Tensor arguments that must be differentiated are :class:`VectorField` objects;
the projected fields ``vE`` and ``hE`` are re-split at every stencil point.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NotASubmersionError, NotBasicError, PreconditionViolated
from .geometry import (
    ChartManifold,
    ScalarField,
    TangentVector,
    VectorField,
    connection_term,
    directional_derivative,
    gradient_components,
    gram_schmidt,
    inner,
    lie_bracket,
    nabla,
)

ALGEBRA_TOL = 1e-8
DERIVATIVE_TOL = 1e-6
CURVATURE_TOL = 1e-4
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class VerticalHorizontalSplit:
    at: np.ndarray
    vertical: np.ndarray  # (m - n, m), g-orthonormal rows
    horizontal: np.ndarray  # (n, m)

    @property
    def vertical_basis(self) -> list[TangentVector]:
        return [TangentVector(self.at, u) for u in self.vertical]

    @property
    def horizontal_basis(self) -> list[TangentVector]:
        return [TangentVector(self.at, x) for x in self.horizontal]

    @property
    def basis(self) -> np.ndarray:
        return np.vstack([self.vertical, self.horizontal])


@dataclass(frozen=True, eq=False)
class SmoothSubmersionMap:
    total: ChartManifold
    base: ChartManifold
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    vertical_frame: Sequence[VectorField]
    horizontal_frame: Sequence[VectorField]
    name: str = "F"
    _cache: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        m, n = self.total.dim, self.base.dim
        if not n < m:
            raise ValueError("base dimension must be smaller than total dimension")
        if len(self.vertical_frame) != m - n or len(self.horizontal_frame) != n:
            raise ValueError(f"need {m - n} vertical and {n} horizontal frame fields")
        self._cache["split"] = lru_cache(maxsize=8192)(self._split_bytes)

    @property
    def m(self) -> int:
        return self.total.dim

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def fiber_dim(self) -> int:
        return self.total.dim - self.base.dim

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.eval(p), dtype=float).reshape(self.n)

    def J(self, p) -> np.ndarray:
        return np.asarray(self.jacobian(p), dtype=float).reshape(self.n, self.m)

    def push(self, p, v) -> np.ndarray:
        return self.J(p) @ np.asarray(v, dtype=float)

    def base_inner(self, p, a, b) -> float:
        return float(np.asarray(a) @ self.base.g(self(p)) @ np.asarray(b))

    def base_norm(self, p, a) -> float:
        return float(np.sqrt(max(self.base_inner(p, a, a), 0.0)))

    def _split_bytes(self, key: bytes) -> VerticalHorizontalSplit:
        p = np.frombuffer(key, dtype=float).copy()
        J = self.J(p)
        s = np.linalg.svd(J, compute_uv=False)
        if s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
            raise NotASubmersionError(f"differential has rank < {self.n} at {list(p)}")
        g = self.total.g(p)
        vecs = [U(p) for U in self.vertical_frame] + [X(p) for X in self.horizontal_frame]
        basis = np.array(gram_schmidt(g, vecs))
        k = self.fiber_dim
        for a in (basis[:k], basis[k:]):
            a.setflags(write=False)
        return VerticalHorizontalSplit(p, basis[:k], basis[k:])

    def split_at(self, p) -> VerticalHorizontalSplit:
        return self._cache["split"](self.total.point(p).tobytes())

    def vertical_part(self, p, w) -> np.ndarray:
        sp = self.split_at(p)
        g = self.total.g(p)
        w = np.asarray(w, dtype=float)
        return sp.vertical.T @ (sp.vertical @ (g @ w))

    def horizontal_part(self, p, w) -> np.ndarray:
        sp = self.split_at(p)
        g = self.total.g(p)
        w = np.asarray(w, dtype=float)
        return sp.horizontal.T @ (sp.horizontal @ (g @ w))


def split(F: SmoothSubmersionMap, p) -> VerticalHorizontalSplit:
    return F.split_at(p)


# -- projected and basis fields ------------------------------------------------

def vertical_projection(F: SmoothSubmersionMap, W: VectorField) -> VectorField:
    return VectorField(lambda p: F.vertical_part(p, W(p)), f"v({W.name})")


def horizontal_projection(F: SmoothSubmersionMap, W: VectorField) -> VectorField:
    return VectorField(lambda p: F.horizontal_part(p, W(p)), f"h({W.name})")


def vertical_basis_field(F: SmoothSubmersionMap, i: int) -> VectorField:
    return VectorField(lambda p: F.split_at(p).vertical[i], f"U{i + 1}")


def horizontal_basis_field(F: SmoothSubmersionMap, j: int) -> VectorField:
    return VectorField(lambda p: F.split_at(p).horizontal[j], f"X{j + 1}")


# -- dilation --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DilationField:
    field: ScalarField
    analytic: bool = True

    def __call__(self, p) -> float:
        lam = self.field(p)
        if not lam > 0:
            raise PreconditionViolated(f"dilation is not positive at {list(p)}", hypothesis="positive dilation")
        return lam

    @property
    def eval(self):
        return self.__call__

    def differential(self, p) -> np.ndarray:
        return self.field.differential(p)

    def inverse_square(self) -> ScalarField:
        """The function 1/lambda^2 with its differential."""
        return ScalarField(
            lambda p: 1.0 / self(p) ** 2,
            lambda p: -2.0 * self.field.differential(p) / self(p) ** 3,
            "1/lambda^2",
        )


def estimated_square_dilation(F: SmoothSubmersionMap, p) -> float:
    """g'(F*X, F*X)/g(X, X) for the first horizontal basis vector X."""
    X = F.split_at(p).horizontal[0]
    JX = F.push(p, X)
    return F.base_inner(p, JX, JX) / inner(F.total, p, X, X)


def estimated_dilation(F: SmoothSubmersionMap) -> DilationField:
    return DilationField(ScalarField(lambda p: float(np.sqrt(estimated_square_dilation(F, p))), name="lambda~"), analytic=False)


@dataclass(frozen=True)
class ConformalReport:
    dilation: DilationField
    points: np.ndarray
    lambdas: np.ndarray
    residuals: np.ndarray
    tolerances: np.ndarray
    analytic_mismatch: float

    @property
    def residual_max(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def conformal(self) -> bool:
        return bool(np.all(self.residuals <= self.tolerances))


def conformal_residual(F: SmoothSubmersionMap, p) -> tuple[float, float]:
    """(lambda^2 estimate, max_ab |g'(F*X_a, F*X_b) - lambda^2 g(X_a, X_b)|)."""
    sp = F.split_at(p)
    lam2 = estimated_square_dilation(F, p)
    JX = [F.push(p, X) for X in sp.horizontal]
    res = 0.0
    for a in range(F.n):
        for b in range(a, F.n):
            lhs = F.base_inner(p, JX[a], JX[b])
            res = max(res, abs(lhs - lam2 * inner(F.total, p, sp.horizontal[a], sp.horizontal[b])))
    return lam2, res


def check_conformal(F: SmoothSubmersionMap, points, dilation: Optional[DilationField] = None) -> ConformalReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam2 = np.empty(len(pts))
    res = np.empty(len(pts))
    for k, p in enumerate(pts):
        lam2[k], res[k] = conformal_residual(F, p)
    lambdas = np.sqrt(lam2)
    mismatch = 0.0
    if dilation is not None:
        mismatch = float(max(abs(dilation(p) - l) for p, l in zip(pts, lambdas)))
    else:
        dilation = estimated_dilation(F)
    tol = ALGEBRA_TOL * np.maximum(1.0, lam2)
    return ConformalReport(dilation, pts, lambdas, res, tol, mismatch)


def inverse_square_gradient(F: SmoothSubmersionMap, dilation: DilationField, p) -> np.ndarray:
    return gradient_components(F.total, dilation.inverse_square(), p)


# -- O'Neill tensors -------------------------------------------------------------

@dataclass(frozen=True)
class ONeillValue:
    at: np.ndarray
    kind: str
    output: TangentVector

    @property
    def components(self) -> np.ndarray:
        return self.output.components


def _field(W) -> VectorField:
    if isinstance(W, VectorField):
        return W
    return VectorField.constant(np.asarray(W.components if isinstance(W, TangentVector) else W, dtype=float))


def t_components(F: SmoothSubmersionMap, p, e1, E2: VectorField) -> np.ndarray:
    """T_{e1} E2 = h nabla_{v e1} v E2 + v nabla_{v e1} h E2."""
    p = F.total.point(p)
    u = F.vertical_part(p, e1)
    a = nabla(F.total, p, u, vertical_projection(F, E2))
    b = nabla(F.total, p, u, horizontal_projection(F, E2))
    return F.horizontal_part(p, a) + F.vertical_part(p, b)


def a_components(F: SmoothSubmersionMap, p, e1, E2: VectorField) -> np.ndarray:
    """A_{e1} E2 = h nabla_{h e1} v E2 + v nabla_{h e1} h E2."""
    p = F.total.point(p)
    x = F.horizontal_part(p, e1)
    a = nabla(F.total, p, x, vertical_projection(F, E2))
    b = nabla(F.total, p, x, horizontal_projection(F, E2))
    return F.horizontal_part(p, a) + F.vertical_part(p, b)


def tensor_T(F: SmoothSubmersionMap, U, V, p) -> ONeillValue:
    p = F.total.point(p)
    e1 = _field(U)(p)
    return ONeillValue(p, "T", TangentVector(p, t_components(F, p, e1, _field(V))))


def tensor_A(F: SmoothSubmersionMap, X, Y, p) -> ONeillValue:
    p = F.total.point(p)
    e1 = _field(X)(p)
    return ONeillValue(p, "A", TangentVector(p, a_components(F, p, e1, _field(Y))))


def a_formula_value(F: SmoothSubmersionMap, dilation: DilationField, X: VectorField, Y: VectorField, p) -> np.ndarray:
    """1/2 (v[X, Y] - lambda^2 g(X, Y) grad_v(1/lambda^2))."""
    p = F.total.point(p)
    br = F.vertical_part(p, lie_bracket(X, Y, p))
    w = F.vertical_part(p, inverse_square_gradient(F, dilation, p))
    return 0.5 * (br - dilation(p) ** 2 * inner(F.total, p, X(p), Y(p)) * w)


def a_formula_residual(F: SmoothSubmersionMap, dilation: DilationField, X: VectorField, Y: VectorField, p) -> float:
    p = F.total.point(p)
    diff = a_components(F, p, X(p), Y) - a_formula_value(F, dilation, X, Y, p)
    return float(np.sqrt(max(inner(F.total, p, diff, diff), 0.0)))


def mean_curvature_components(F: SmoothSubmersionMap, p) -> np.ndarray:
    p = F.total.point(p)
    sp = F.split_at(p)
    acc = np.zeros(F.m)
    for i in range(F.fiber_dim):
        acc += t_components(F, p, sp.vertical[i], vertical_basis_field(F, i))
    return acc / F.fiber_dim


def mean_curvature(F: SmoothSubmersionMap, p) -> TangentVector:
    p = F.total.point(p)
    return TangentVector(p, mean_curvature_components(F, p))


def umbilical_residual(F: SmoothSubmersionMap, p) -> float:
    p = F.total.point(p)
    sp = F.split_at(p)
    H = mean_curvature_components(F, p)
    worst = 0.0
    for i in range(F.fiber_dim):
        for j in range(F.fiber_dim):
            t = t_components(F, p, sp.vertical[i], vertical_basis_field(F, j))
            d = t - (1.0 if i == j else 0.0) * H
            worst = max(worst, float(np.sqrt(max(inner(F.total, p, d, d), 0.0))))
    return worst


# -- second fundamental form and tension ---------------------------------------

@dataclass(frozen=True)
class SecondFundamentalFormValue:
    at: np.ndarray
    value: TangentVector  # direct pullback-connection value, based at F(p)
    formula: np.ndarray  # conformal closed form
    residual: float


def _pushed_field(F: SmoothSubmersionMap, Y: VectorField) -> Callable:
    return lambda x: F.J(x) @ Y(x)


def basic_defect(F: SmoothSubmersionMap, X: VectorField, p) -> float:
    """Largest variation of F*X along the vertical basis directions at p."""
    p = F.total.point(p)
    pushed = _pushed_field(F, X)
    return max(F.base_norm(p, directional_derivative(pushed, p, u)) for u in F.split_at(p).vertical)


def sff_direct(F: SmoothSubmersionMap, X: VectorField, Y: VectorField, p) -> np.ndarray:
    """(nabla F*)(X, Y) = nabla^F_X F*Y - F*(nabla_X Y) through the pullback connection."""
    p = F.total.point(p)
    Xp = X(p)
    q = F(p)
    d = directional_derivative(_pushed_field(F, Y), p, Xp)
    pull = d + connection_term(F.base, q, F.push(p, Xp), F.push(p, Y(p)))
    return pull - F.push(p, nabla(F.total, p, Xp, Y, Y.jacobian))


def sff_formula(F: SmoothSubmersionMap, dilation: DilationField, X, Y, p) -> np.ndarray:
    """-(lambda^2/2){X(1/lambda^2) F*Y + Y(1/lambda^2) F*X - g(X, Y) F*(grad_h 1/lambda^2)}."""
    p = F.total.point(p)
    x, y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    w = inverse_square_gradient(F, dilation, p)
    wh = F.horizontal_part(p, w)
    d = dilation.inverse_square().differential(p)
    lam2 = dilation(p) ** 2
    return -0.5 * lam2 * ((d @ x) * F.push(p, y) + (d @ y) * F.push(p, x) - inner(F.total, p, x, y) * F.push(p, wh))


def second_fundamental_form(
    F: SmoothSubmersionMap, X: VectorField, Y: VectorField, p, dilation: DilationField, check_basic: bool = True
) -> SecondFundamentalFormValue:
    p = F.total.point(p)
    if check_basic:
        for W in (X, Y):
            defect = basic_defect(F, W, p)
            if defect > DERIVATIVE_TOL * max(1.0, F.base_norm(p, F.push(p, W(p)))):
                raise NotBasicError(f"field {W.name or '?'} is not basic at {list(p)} (defect {defect:.3e})")
    direct = sff_direct(F, X, Y, p)
    formula = sff_formula(F, dilation, X(p), Y(p), p)
    return SecondFundamentalFormValue(p, TangentVector(F(p), direct), formula, F.base_norm(p, direct - formula))


@dataclass(frozen=True)
class TensionValue:
    at: np.ndarray
    trace: np.ndarray
    closed_form: np.ndarray
    residual: float


def tension_trace(F: SmoothSubmersionMap, p) -> np.ndarray:
    p = F.total.point(p)
    fields = [vertical_basis_field(F, i) for i in range(F.fiber_dim)]
    fields += [horizontal_basis_field(F, j) for j in range(F.n)]
    return sum(sff_direct(F, E, E, p) for E in fields)


def tension_closed_form(F: SmoothSubmersionMap, dilation: DilationField, p) -> np.ndarray:
    """(n - 2)(lambda^2/2) F*(grad_h 1/lambda^2) - (m - n) F*(H)."""
    p = F.total.point(p)
    wh = F.horizontal_part(p, inverse_square_gradient(F, dilation, p))
    H = mean_curvature_components(F, p)
    return (F.n - 2) * 0.5 * dilation(p) ** 2 * F.push(p, wh) - F.fiber_dim * F.push(p, H)


def tension_field(F: SmoothSubmersionMap, p, dilation: DilationField) -> TensionValue:
    p = F.total.point(p)
    tr = tension_trace(F, p)
    cf = tension_closed_form(F, dilation, p)
    return TensionValue(p, tr, cf, F.base_norm(p, tr - cf))


@dataclass(frozen=True)
class HarmonicityReport:
    harmonic: bool
    harmonic_by_f: bool
    harmonic_by_tension: bool
    residual_f: float
    residual_tension: float
    predicted_tension: float
    tolerance: float

    @property
    def consistent(self) -> bool:
        return self.harmonic_by_f == self.harmonic_by_tension


def dilation_gradient_parts(F: SmoothSubmersionMap, dilation: DilationField, p) -> tuple[float, float]:
    """(|grad_h lambda|, |grad_v lambda|)."""
    lam_grad = gradient_components(F.total, dilation.field, p)
    h = F.horizontal_part(p, lam_grad)
    v = F.vertical_part(p, lam_grad)
    return float(np.sqrt(max(inner(F.total, p, h, h), 0))), float(np.sqrt(max(inner(F.total, p, v, v), 0)))


def harmonicity_check(
    F: SmoothSubmersionMap, f: ScalarField, points, dilation: DilationField, tol: float = DERIVATIVE_TOL
) -> HarmonicityReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    for p in pts:
        gh, gv = dilation_gradient_parts(F, dilation, p)
        if gh > tol:
            raise PreconditionViolated(f"map is not homothetic at {list(p)} (|grad_h lambda| = {gh:.3e})", "homothetic")
        if gv > tol:
            raise PreconditionViolated(
                f"dilation varies along the fiber at {list(p)} (|grad_v lambda| = {gv:.3e})", "fiber-constant dilation"
            )
    rf = rt = pred = 0.0
    for p in pts:
        gf = gradient_components(F.total, f, p)
        gfh = F.horizontal_part(p, gf)
        rf = max(rf, float(np.sqrt(max(inner(F.total, p, gfh, gfh), 0.0))))
        rt = max(rt, F.base_norm(p, tension_trace(F, p)))
        pred = max(pred, F.fiber_dim * F.base_norm(p, F.push(p, gf)))
    by_f, by_t = rf <= tol, rt <= tol
    return HarmonicityReport(by_t, by_f, by_t, rf, rt, pred, tol)
