"""Clairaut-specific checks: the tensor criterion, the invariant e^f sin(omega)
along geodesics, the geodesic conditions split into vertical and horizontal
parts, mean-curvature formulas and the vertical curvature identities.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionViolated, TrivialIdentityError
from .geodesic import GeodesicState, GeodesicTrace, integrate
from .geometry import (
    ChartManifold,
    MetricField,
    ScalarField,
    VectorField,
    connection_term,
    directional_derivative,
    gradient_components,
    inner,
    nabla,
    sectional,
)
from .submersion import (
    DERIVATIVE_TOL,
    DilationField,
    SmoothSubmersionMap,
    a_components,
    inverse_square_gradient,
    mean_curvature_components,
    t_components,
    umbilical_residual,
    vertical_basis_field,
)

CONDITION_TOL = 1e-6
INVARIANT_TOL = 1e-5
CURVE_TOL = 1e-4
IDENTITY_TOL = 1e-3


def _norm(man: ChartManifold, p, v) -> float:
    return float(np.sqrt(max(inner(man, p, v, v), 0.0)))


# -- angle and invariant -----------------------------------------------------------

def angle_components(F: SmoothSubmersionMap, p, v) -> tuple[float, float, float]:
    """(g(X, X), g(U, U), |v|^2) for v = X + U split horizontally/vertically."""
    sp = F.split_at(p)
    gv = F.total.g(p) @ np.asarray(v, dtype=float)
    # frame rows are g-orthonormal, so squared norms are sums of squared coefficients
    a, b = sp.horizontal @ gv, sp.vertical @ gv
    return float(a @ a), float(b @ b), float(np.asarray(v, dtype=float) @ gv)


def _angle(xx: float, uu: float, a: float) -> tuple[float, float]:
    if not a > 1e-24:
        raise DomainError("angle undefined for a zero velocity")
    xx, uu = max(xx, 0.0), max(uu, 0.0)
    return math.atan2(math.sqrt(uu), math.sqrt(xx)), min(1.0, math.sqrt(uu / (xx + uu)))


def sin_omega(F: SmoothSubmersionMap, p, v) -> float:
    return _angle(*angle_components(F, p, v))[1]


def angle_omega(F: SmoothSubmersionMap, s: GeodesicState) -> float:
    """Angle in [0, pi/2] between the velocity and the horizontal space."""
    return _angle(*angle_components(F, s.point, s.velocity))[0]


@dataclass(frozen=True)
class InvariantTrace:
    times: np.ndarray
    values: np.ndarray
    omega: np.ndarray
    sin_omega: np.ndarray

    @property
    def drift(self) -> float:
        return float(np.max(self.values) - np.min(self.values)) if self.values.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "omega", "invariant_value"])
        for row in zip(self.times, self.omega, self.values):
            w.writerow([format(float(c), ".17g") for c in row])
        return buf.getvalue()


def clairaut_invariant_trace(F: SmoothSubmersionMap, f: ScalarField, trace: GeodesicTrace) -> InvariantTrace:
    """e^{f(alpha(t))} sin(omega(t)) at every trace sample."""
    n = len(trace)
    om = np.empty(n)
    so = np.empty(n)
    vals = np.empty(n)
    for k in range(n):
        p, v = trace.points[k], trace.velocities[k]
        om[k], so[k] = _angle(*angle_components(F, p, v))
        vals[k] = math.exp(f(p)) * so[k]
    return InvariantTrace(trace.times.copy(), vals, om, so)


def sample_geodesic_states(
    F: SmoothSubmersionMap, box: np.ndarray, rng: np.random.Generator, count: int, min_sin: float = 0.2
) -> list[GeodesicState]:
    """Random unit-speed initial states whose velocity is at least ``min_sin`` vertical."""
    states = []
    lo, hi = box[:, 0], box[:, 1]
    # keep starting points away from the box edges so unit-time geodesics stay inside the domain
    lo, hi = lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)
    while len(states) < count:
        p = lo + (hi - lo) * rng.random(F.m)
        v = rng.standard_normal(F.m)
        v = v / _norm(F.total, p, v)
        if sin_omega(F, p, v) >= min_sin:
            states.append(GeodesicState(0.0, p, v))
    return states


# -- tensor criterion ----------------------------------------------------------------

def _scalar_identity_terms(F, dilation, f, p, u, field_u, x):
    T = t_components(F, p, u, field_u)
    w = F.vertical_part(p, inverse_square_gradient(F, dilation, p))
    gf = gradient_components(F.total, f, p)
    lam2 = dilation(p) ** 2
    g = lambda a, b: inner(F.total, p, a, b)
    return g(T, x), g(u, u) * g(x, gf), 0.5 * lam2 * g(x, x) * g(u, w)


def clairaut_condition_residual(
    F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, p, X: Optional[np.ndarray] = None
) -> float:
    """max |g(T_U U, X) + g(U, U) g(X, grad f) + (lambda^2/2) g(X, X) g(U, grad_v 1/lambda^2)|
    over orthonormal vertical U and the horizontal basis (or the given unit X)."""
    p = F.total.point(p)
    sp = F.split_at(p)
    xs = sp.horizontal if X is None else [np.asarray(X, dtype=float)]
    worst = 0.0
    for i, u in enumerate(sp.vertical):
        fu = vertical_basis_field(F, i)
        for x in xs:
            worst = max(worst, abs(sum(_scalar_identity_terms(F, dilation, f, p, u, fu, x))))
    return worst


def clairaut_condition_by_degree(F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, p) -> dict:
    """The identity for vectors sU, tX holds for all scales only if each homogeneous part vanishes.

    Returns the max magnitude of the parts of degree (2,1) [T term plus the f term] and
    (2,2)-(2,1) [the dilation term], evaluated with unit U and X.
    """
    p = F.total.point(p)
    sp = F.split_at(p)
    t_f = lam = 0.0
    for i, u in enumerate(sp.vertical):
        fu = vertical_basis_field(F, i)
        for x in sp.horizontal:
            a, b, c = _scalar_identity_terms(F, dilation, f, p, u, fu, x)
            t_f, lam = max(t_f, abs(a + b)), max(lam, abs(c))
    return {"tensor_and_potential": t_f, "dilation_term": lam}


@dataclass(frozen=True)
class ClairautReport:
    scenario: str
    f: str
    points: np.ndarray
    residuals: np.ndarray
    tolerance: float

    @property
    def residual_max(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def verdict(self) -> bool:
        return self.residual_max <= self.tolerance


def clairaut_report(name: str, F, dilation, f: ScalarField, points, tol: float = CONDITION_TOL) -> ClairautReport:
    pts = np.atleast_2d(points)
    res = np.array([clairaut_condition_residual(F, dilation, f, p) for p in pts])
    return ClairautReport(name, f.name, pts, res, tol)


# -- geodesic conditions ------------------------------------------------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _split_velocity(F, p, v):
    return F.vertical_part(p, v), F.horizontal_part(p, v)


def _residuals_at(F: SmoothSubmersionMap, p, v, dU, dX) -> tuple[float, float]:
    """Vertical and horizontal parts of nabla_{alpha'} alpha' through A and T."""
    U, X = _split_velocity(F, p, v)
    cX, cU = VectorField.constant(X), VectorField.constant(U)
    nabU = dU + connection_term(F.total, p, v, U)
    nabX = dX + connection_term(F.total, p, v, X)
    vert = a_components(F, p, X, cX) + t_components(F, p, U, cX) + F.vertical_part(p, nabU)
    hor = F.horizontal_part(p, nabX) + a_components(F, p, X, cU) + t_components(F, p, U, cU)
    return _norm(F.total, p, vert), _norm(F.total, p, hor)


@dataclass(frozen=True)
class ConditionResiduals:
    times: np.ndarray
    vertical: np.ndarray
    horizontal: np.ndarray

    @property
    def max_vertical(self) -> float:
        return float(np.max(self.vertical)) if self.vertical.size else 0.0

    @property
    def max_horizontal(self) -> float:
        return float(np.max(self.horizontal)) if self.horizontal.size else 0.0


def _curve_residuals(F, pts, vels, h, indices) -> ConditionResiduals:
    Us = np.array([F.vertical_part(p, v) for p, v in zip(pts, vels)])
    Xs = vels - Us
    vr, hr = [], []
    for k in indices:
        sl = slice(k - 2, k + 3)
        dU = _D1 @ Us[sl] / h
        dX = _D1 @ Xs[sl] / h
        a, b = _residuals_at(F, pts[k], vels[k], dU, dX)
        vr.append(a)
        hr.append(b)
    return np.array(vr), np.array(hr)


def trace_condition_residuals(F: SmoothSubmersionMap, trace: GeodesicTrace, stride: int = 1) -> ConditionResiduals:
    idx = list(range(2, len(trace) - 2, max(1, stride)))
    vr, hr = _curve_residuals(F, trace.points, trace.velocities, trace.step, idx)
    return ConditionResiduals(trace.times[idx], vr, hr)


def geodesic_condition_residuals(F: SmoothSubmersionMap, s: GeodesicState, h: float = 1e-3) -> tuple[float, float]:
    """Residuals at ``s`` along the geodesic through it (integrated over [-2h, 2h])."""
    fwd = integrate(F.total, GeodesicState(0.0, s.point, s.velocity), 2 * h, h, backend="numpy")
    bwd = integrate(F.total, GeodesicState(0.0, s.point, -s.velocity), 2 * h, h, backend="numpy")
    pts = np.vstack([bwd.points[:0:-1], fwd.points])
    vels = np.vstack([-bwd.velocities[:0:-1], fwd.velocities])
    vr, hr = _curve_residuals(F, pts, vels, h, [2])
    return float(vr[0]), float(hr[0])


def curve_condition_residuals(
    F: SmoothSubmersionMap, curve: Callable[[float], tuple], times, h: float = 1e-3
) -> ConditionResiduals:
    """Same residuals for an arbitrary curve ``t -> (point, velocity)``; zero iff it is a geodesic."""
    times = np.asarray(times, dtype=float)
    vr, hr = [], []
    for t in times:
        samples = [curve(t + j * h) for j in range(-2, 3)]
        pts = np.array([np.asarray(s[0], dtype=float) for s in samples])
        vels = np.array([np.asarray(s[1], dtype=float) for s in samples])
        a, b = _curve_residuals(F, pts, vels, h, [2])
        vr.append(a[0])
        hr.append(b[0])
    return ConditionResiduals(times, np.array(vr), np.array(hr))


@dataclass(frozen=True)
class ProjectedGeodesicReport:
    times: np.ndarray
    condition: np.ndarray  # |LHS - RHS| of the projected-geodesic condition
    base_acceleration: np.ndarray  # |nabla^B_beta' beta'| from differences of beta = F(alpha)
    agreement: np.ndarray  # |(LHS - RHS) + nabla^B_beta' beta'|
    a_xx: np.ndarray  # |A_X X|
    horizontal_condition: np.ndarray  # two-term condition for horizontal geodesics

    @property
    def residual(self) -> float:
        return float(np.max(self.condition)) if self.condition.size else 0.0

    @property
    def agreement_max(self) -> float:
        return float(np.max(self.agreement)) if self.agreement.size else 0.0


def projected_condition_terms(F: SmoothSubmersionMap, dilation: DilationField, p, v):
    """(LHS - RHS, A_X X, horizontal two-term condition) for the projected-geodesic criterion.

    LHS = lambda^2 X(1/lambda^2) F*X + F*(2 A_X U + T_U U),
    RHS = (lambda^2/2) |X|^2 F*(grad_h 1/lambda^2).
    """
    U, X = _split_velocity(F, p, v)
    cU = VectorField.constant(U)
    lam2 = dilation(p) ** 2
    d = dilation.inverse_square().differential(p)
    wh = F.horizontal_part(p, inverse_square_gradient(F, dilation, p))
    lead = lam2 * (d @ X) * F.push(p, X)
    rhs = 0.5 * lam2 * inner(F.total, p, X, X) * F.push(p, wh)
    lhs = lead + F.push(p, 2.0 * a_components(F, p, X, cU) + t_components(F, p, U, cU))
    axx = a_components(F, p, X, VectorField.constant(X))
    return lhs - rhs, axx, lead - rhs


def projected_geodesic_residual(
    F: SmoothSubmersionMap, dilation: DilationField, trace: GeodesicTrace, stride: int = 1
) -> ProjectedGeodesicReport:
    h = trace.step
    beta = np.array([F(p) for p in trace.points])
    idx = list(range(2, len(trace) - 2, max(1, stride)))
    cond, acc, agree, axx, hc = [], [], [], [], []
    for k in idx:
        p, v = trace.points[k], trace.velocities[k]
        diff, a, two = projected_condition_terms(F, dilation, p, v)
        sl = slice(k - 2, k + 3)
        bd = _D1 @ beta[sl] / h
        bdd = _D2 @ beta[sl] / h ** 2
        nab = bdd + connection_term(F.base, beta[k], bd, bd)
        cond.append(F.base_norm(p, diff))
        acc.append(F.base_norm(p, nab))
        agree.append(F.base_norm(p, diff + nab))
        axx.append(_norm(F.total, p, a))
        hc.append(F.base_norm(p, two))
    arr = np.array
    return ProjectedGeodesicReport(trace.times[idx], arr(cond), arr(acc), arr(agree), arr(axx), arr(hc))


# -- mean curvature formulas ---------------------------------------------------------

def _fiber_dilation_coefficients(F, dilation, p) -> np.ndarray:
    """g(U_i, grad_v 1/lambda^2) for each vertical basis vector."""
    w = F.vertical_part(p, inverse_square_gradient(F, dilation, p))
    return np.array([inner(F.total, p, u, w) for u in F.split_at(p).vertical])


def mean_curvature_formula(F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, p) -> np.ndarray:
    """-grad_h f - lambda^2/(2(m-n)) sum_i sum_j g(U_i, grad_v 1/lambda^2) X_j."""
    p = F.total.point(p)
    sp = F.split_at(p)
    coeff = _fiber_dilation_coefficients(F, dilation, p).sum()
    gfh = F.horizontal_part(p, gradient_components(F.total, f, p))
    return -gfh - dilation(p) ** 2 / (2 * F.fiber_dim) * coeff * sp.horizontal.sum(axis=0)


@dataclass(frozen=True)
class MeanCurvatureCheck:
    at: np.ndarray
    direct: np.ndarray
    formula: np.ndarray
    residual: float
    divergence_horizontal: float
    divergence_full: float
    divergence_formula: float
    divergence_residual: float


def mean_curvature_formula_check(F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, p) -> MeanCurvatureCheck:
    p = F.total.point(p)
    sp = F.split_at(p)
    H = mean_curvature_components(F, p)
    Hf = mean_curvature_formula(F, dilation, f, p)
    Hfield = VectorField(lambda x: mean_curvature_components(F, x), "H")
    grad_f = VectorField(lambda x: gradient_components(F.total, f, x), "grad f")
    div_h = sum(inner(F.total, p, nabla(F.total, p, x, Hfield), x) for x in sp.horizontal)
    div_v = sum(inner(F.total, p, nabla(F.total, p, u, Hfield), u) for u in sp.vertical)
    lap_h = sum(inner(F.total, p, nabla(F.total, p, x, grad_f), x) for x in sp.horizontal)
    coeff = lambda x: _fiber_dilation_coefficients(F, dilation, x).sum()
    corr = sum(float(directional_derivative(coeff, p, x)) for x in sp.horizontal)
    div_formula = -lap_h - F.n * dilation(p) ** 2 / F.fiber_dim * corr
    return MeanCurvatureCheck(
        p, H, Hf, _norm(F.total, p, H - Hf), float(div_h), float(div_h + div_v), float(div_formula),
        abs(float(div_h) - div_formula),
    )


# -- curvature identities --------------------------------------------------------------

def vertical_scalar_curvature(F: SmoothSubmersionMap, p) -> float:
    """sum_{i != j} sec(U_i, U_j) with the ambient sectional curvature."""
    p = F.total.point(p)
    V = F.split_at(p).vertical
    k = len(V)
    return float(sum(sectional(F.total, p, V[i], V[j]) for i in range(k) for j in range(k) if i != j))


def fiber_chart(F: SmoothSubmersionMap, p, step: float = 1e-4) -> ChartManifold:
    """Fiber through ``p`` with its induced metric, in coordinates s -> p + V s + W c(s).

    V and W are the vertical and horizontal bases at p; c(s) solves F(p + V s + W c) = F(p)
    by Newton's method.  At s = 0 the coordinate basis is the vertical basis at p.
    """
    p = F.total.point(p)
    sp = F.split_at(p)
    V, W = sp.vertical.T, sp.horizontal.T
    target = F(p)

    def locate(s):
        c = np.zeros(F.n)
        for _ in range(50):
            x = p + V @ s + W @ c
            r = F(x) - target
            dc = np.linalg.solve(F.J(x) @ W, -r)
            c = c + dc
            if np.max(np.abs(dc)) <= 1e-15 * max(1.0, np.max(np.abs(c))):
                break
        x = p + V @ s + W @ c
        JW = F.J(x) @ W
        dc_ds = -np.linalg.solve(JW, F.J(x) @ V)
        return x, V + W @ dc_ds

    def metric(s):
        x, Jphi = locate(np.asarray(s, dtype=float))
        return Jphi.T @ F.total.g(x) @ Jphi

    return ChartManifold(F.fiber_dim, MetricField(F.fiber_dim, metric, derivative_step=step), f"fiber of {F.name}")


def fiber_sectional_sums(F: SmoothSubmersionMap, p) -> np.ndarray:
    """Intrinsic Ricci values Ric^(U_i, U_i) = sum_{j != i} sec^(U_i, U_j) of the fiber."""
    chart = fiber_chart(F, p)
    k = F.fiber_dim
    s0 = np.zeros(k)
    e = np.eye(k)
    return np.array([sum(sectional(chart, s0, e[i], e[j]) for j in range(k) if j != i) for i in range(k)])


def fiber_scalar_curvature(F: SmoothSubmersionMap, p) -> float:
    return float(fiber_sectional_sums(F, p).sum())


@dataclass(frozen=True)
class CurvatureIdentityReport:
    lhs: float
    rhs: float
    terms: dict = dc_field(default_factory=dict)
    note: str = ""

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _identity_terms(F, dilation, f, p) -> dict:
    lam = dilation(p)
    lam2 = lam * lam
    w = inverse_square_gradient(F, dilation, p)
    wh = F.horizontal_part(p, w)
    gf = gradient_components(F.total, f, p)
    gfh = F.horizontal_part(p, gf)
    d = dilation.inverse_square().differential(p)
    sp = F.split_at(p)
    xs = np.array([d @ x for x in sp.horizontal])
    us = np.array([d @ u for u in sp.vertical])
    return {
        "lambda2_grad_h_f2": lam2 * inner(F.total, p, gfh, gfh),
        "lambda4_grad_h_inv2": lam2 * lam2 / 4.0 * inner(F.total, p, wh, wh),
        "lambda2_cross": lam2 * inner(F.total, p, gf, wh),
        "sum_X_inv": float(xs.sum()),
        "U_inv": us,
        "lambda4": lam2 * lam2,
    }


def vertical_curvature_identity_residual(
    F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, p
) -> CurvatureIdentityReport:
    """K_v against K^ - k(k-1)(t1 - t2 + t3) - (lambda^4/2)(k-1) sum_i sum_l (X_l 1/lambda^2)(U_i 1/lambda^2),
    where k = m - n.  The index l in the last term is summed over the horizontal basis."""
    k = F.fiber_dim
    if k < 2:
        raise TrivialIdentityError(f"fibers have dimension {k}; the vertical scalar curvature is an empty sum")
    p = F.total.point(p)
    K_nu = vertical_scalar_curvature(F, p)
    K_hat = fiber_scalar_curvature(F, p)
    t = _identity_terms(F, dilation, f, p)
    bracket = t["lambda2_grad_h_f2"] - t["lambda4_grad_h_inv2"] + t["lambda2_cross"]
    last = 0.5 * t["lambda4"] * (k - 1) * t["sum_X_inv"] * float(t["U_inv"].sum())
    rhs = K_hat - k * (k - 1) * bracket - last
    terms = {
        "K_hat": K_hat,
        "grad_h_f": t["lambda2_grad_h_f2"],
        "grad_h_inverse_dilation": t["lambda4_grad_h_inv2"],
        "cross": t["lambda2_cross"],
        "mixed_derivative": last,
        "correction": rhs - K_hat,
    }
    return CurvatureIdentityReport(K_nu, rhs, terms, "index l summed over the horizontal basis")


def ricci_identity_residual(
    F: SmoothSubmersionMap, dilation: DilationField, f: ScalarField, lambda_f, p, i: int, anisotropy_tol: float = 1e-4
) -> CurvatureIdentityReport:
    """(k-1) sum_{j != i} sec(U_i, U_j) against
    lambda_f - (k-1)^2 (t1 - t2 + t3) - (k-1)(lambda^4/4)((k-1) U_i(1/lambda^2) + sum_{j != i} U_j(1/lambda^2)) sum_l X_l(1/lambda^2)."""
    k = F.fiber_dim
    if k < 2:
        raise TrivialIdentityError(f"fibers have dimension {k}; the factor m - n - 1 vanishes")
    if not 0 <= i < k:
        raise ValueError(f"vertical index {i} out of range 0..{k - 1}")
    p = F.total.point(p)
    ric_hat = fiber_sectional_sums(F, p)
    spread = float(np.max(ric_hat) - np.min(ric_hat))
    if spread > anisotropy_tol:
        raise PreconditionViolated(f"fiber Ricci curvature is anisotropic (spread {spread:.3e})", "Einstein fibers")
    lam_f = float(lambda_f(p)) if callable(lambda_f) else float(lambda_f)
    V = F.split_at(p).vertical
    sec_sum = sum(sectional(F.total, p, V[i], V[j]) for j in range(k) if j != i)
    t = _identity_terms(F, dilation, f, p)
    bracket = t["lambda2_grad_h_f2"] - t["lambda4_grad_h_inv2"] + t["lambda2_cross"]
    us = t["U_inv"]
    mixed = (k - 1) * t["lambda4"] / 4.0 * ((k - 1) * us[i] + (us.sum() - us[i])) * t["sum_X_inv"]
    rhs = lam_f - (k - 1) ** 2 * bracket - mixed
    terms = {
        "lambda_f": lam_f,
        "fiber_ricci": float(ric_hat[i]),
        "grad_h_f": t["lambda2_grad_h_f2"],
        "grad_h_inverse_dilation": t["lambda4_grad_h_inv2"],
        "cross": t["lambda2_cross"],
        "mixed_derivative": mixed,
    }
    return CurvatureIdentityReport((k - 1) * sec_sum, rhs, terms, "index l summed over the horizontal basis")


# -- potential inference ----------------------------------------------------------------

@dataclass(frozen=True)
class PotentialEstimate:
    points: np.ndarray
    gradients: np.ndarray  # estimated grad f at each point
    closedness: np.ndarray  # max |d_a w_b - d_b w_a| of the dual one-form

    @property
    def closedness_max(self) -> float:
        return float(np.max(self.closedness)) if self.closedness.size else 0.0


def potential_gradient(F: SmoothSubmersionMap, dilation: DilationField, p) -> np.ndarray:
    """grad f implied by the mean-curvature formula: -H - lambda^2/(2(m-n)) sum_i g(U_i, grad_v 1/lambda^2) sum_j X_j."""
    p = F.total.point(p)
    H = mean_curvature_components(F, p)
    coeff = _fiber_dilation_coefficients(F, dilation, p).sum()
    return -H - dilation(p) ** 2 / (2 * F.fiber_dim) * coeff * F.split_at(p).horizontal.sum(axis=0)


def infer_mean_curvature_potential(
    F: SmoothSubmersionMap, dilation: DilationField, points, tol: float = DERIVATIVE_TOL
) -> PotentialEstimate:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    for p in pts:
        r = umbilical_residual(F, p)
        if r > tol:
            raise PreconditionViolated(f"fibers are not umbilical at {list(p)} (residual {r:.3e})", "umbilical fibers")
    form = lambda x: F.total.g(x) @ potential_gradient(F, dilation, x)
    grads, closed = [], []
    m = F.m
    for p in pts:
        grads.append(potential_gradient(F, dilation, p))
        D = np.array([directional_derivative(form, p, np.eye(m)[a]) for a in range(m)])  # D[a, b] = d_a w_b
        closed.append(float(np.max(np.abs(D - D.T))) if m > 1 else 0.0)
    return PotentialEstimate(pts, np.array(grads), np.array(closed))
