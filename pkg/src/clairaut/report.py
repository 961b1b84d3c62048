"""Run the scenario checks and collect residuals in a JSON-ready form."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lab
from .geodesic import DEFAULT_STEP, integrate
from .geometry import ScalarField
from .scenarios import SubmersionScenario
from .submersion import (
    DERIVATIVE_TOL,
    a_formula_residual,
    check_conformal,
    second_fundamental_form,
    tension_field,
    tension_trace,
    umbilical_residual,
)

SCHEMA_VERSION = 1
SPEED_TOL = 1e-6
TENSION_TOL = 1e-5
SFF_TOL = 1e-5
A_FORMULA_TOL = 1e-5
HARMONIC_TOL = 1e-6


@dataclass(frozen=True)
class RunConfig:
    points: int = 20
    geodesics: int = 10
    step: float = DEFAULT_STEP
    t_end: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.points < 1 or self.geodesics < 0:
            raise ValueError("point count must be positive and geodesic count non-negative")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("step must be positive")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError("t-end must be positive")


@dataclass(frozen=True)
class CheckResult:
    check: str
    scenario: str
    points: list
    residuals: list
    tolerance: float
    expected: Optional[bool] = None
    detail: Optional[dict] = None

    @property
    def residual_max(self) -> float:
        return float(max(self.residuals)) if self.residuals else 0.0

    @property
    def residual_mean(self) -> float:
        return float(sum(self.residuals) / len(self.residuals)) if self.residuals else 0.0

    @property
    def passed(self) -> bool:
        return self.residual_max <= self.tolerance

    @property
    def matches(self) -> bool:
        return self.expected is None or self.expected == self.passed

    def to_json(self) -> dict:
        out = {
            "check": self.check,
            "scenario": self.scenario,
            "points": [[float(c) for c in p] for p in self.points],
            "residual_max": self.residual_max,
            "residual_mean": self.residual_mean,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "expected": self.expected,
            "matches_expectation": self.matches,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


class Sampler:
    """The single seeded generator of a run; draws points, then geodesic initial states."""

    def __init__(self, sc: SubmersionScenario, config: RunConfig):
        rng = np.random.default_rng(config.seed)
        self.points = sc.sample_points(rng, config.points)
        self.states = lab.sample_geodesic_states(sc.map, sc.sample_box, rng, config.geodesics)
        self._traces = None
        self.sc, self.config = sc, config

    def traces(self):
        if self._traces is None:
            self._traces = [
                integrate(self.sc.total, s, s.t + self.config.t_end, self.config.step) for s in self.states
            ]
        return self._traces


def potential(sc: SubmersionScenario) -> ScalarField:
    return sc.clairaut_f if sc.clairaut_f is not None else ScalarField.constant(0.0, "0")


def check_conformality(sc, smp) -> CheckResult:
    rep = check_conformal(sc.map, smp.points, sc.dilation)
    res = (rep.residuals / np.maximum(1.0, rep.lambdas ** 2)).tolist()
    detail = {"dilation_analytic": sc.dilation is not None, "dilation_mismatch": rep.analytic_mismatch}
    return CheckResult("conformal", sc.name, smp.points.tolist(), res, 1e-8, sc.flags.expected_conformal, detail)


def check_umbilical(sc, smp) -> CheckResult:
    res = [umbilical_residual(sc.map, p) for p in smp.points]
    return CheckResult("umbilical", sc.name, smp.points.tolist(), res, DERIVATIVE_TOL, sc.flags.expected_umbilical)


def check_clairaut_condition(sc, smp) -> Optional[CheckResult]:
    if sc.clairaut_f is None:
        return None
    D = sc.dilation_field()
    res = [lab.clairaut_condition_residual(sc.map, D, sc.clairaut_f, p) for p in smp.points]
    return CheckResult("clairaut_condition", sc.name, smp.points.tolist(), res, lab.CONDITION_TOL, sc.flags.expected_clairaut)


def check_invariant_drift(sc, smp) -> Optional[CheckResult]:
    if sc.clairaut_f is None or not smp.states:
        return None
    res = [lab.clairaut_invariant_trace(sc.map, sc.clairaut_f, tr).drift for tr in smp.traces()]
    pts = [s.point.tolist() for s in smp.states]
    return CheckResult("invariant_drift", sc.name, pts, res, lab.INVARIANT_TOL, sc.flags.expected_clairaut)


def check_speed(sc, smp) -> Optional[CheckResult]:
    if not smp.states:
        return None
    res = [tr.speed_drift for tr in smp.traces()]
    return CheckResult("speed_drift", sc.name, [s.point.tolist() for s in smp.states], res, SPEED_TOL, True)


def check_tension(sc, smp) -> CheckResult:
    D = sc.dilation_field()
    res = [tension_field(sc.map, p, D).residual for p in smp.points]
    return CheckResult("tension_consistency", sc.name, smp.points.tolist(), res, TENSION_TOL, True)


def check_harmonic(sc, smp) -> CheckResult:
    F = sc.map
    res = [F.base_norm(p, tension_trace(F, p)) for p in smp.points]
    return CheckResult("harmonic", sc.name, smp.points.tolist(), res, HARMONIC_TOL, sc.flags.expected_harmonic)


def check_second_fundamental_form(sc, smp) -> CheckResult:
    F, D = sc.map, sc.dilation_field()
    res = []
    for p in smp.points:
        worst = 0.0
        for X in F.horizontal_frame:
            for Y in F.horizontal_frame:
                worst = max(worst, second_fundamental_form(F, X, Y, p, D).residual)
        res.append(worst)
    return CheckResult("second_fundamental_form", sc.name, smp.points.tolist(), res, SFF_TOL, True)


def check_a_formula(sc, smp) -> CheckResult:
    F, D = sc.map, sc.dilation_field()
    res = [
        max(a_formula_residual(F, D, X, Y, p) for X in F.horizontal_frame for Y in F.horizontal_frame)
        for p in smp.points
    ]
    return CheckResult("a_formula", sc.name, smp.points.tolist(), res, A_FORMULA_TOL, True)


def check_mean_curvature_formula(sc, smp) -> Optional[CheckResult]:
    if sc.clairaut_f is None:
        return None
    D = sc.dilation_field()
    checks = [lab.mean_curvature_formula_check(sc.map, D, sc.clairaut_f, p) for p in smp.points]
    res = [c.residual for c in checks]
    detail = {"divergence_residual_max": max(c.divergence_residual for c in checks)}
    return CheckResult("mean_curvature_formula", sc.name, smp.points.tolist(), res, DERIVATIVE_TOL, sc.flags.expected_clairaut, detail)


def check_geodesic_conditions(sc, smp, stride: int = 50) -> Optional[CheckResult]:
    if not smp.states:
        return None
    res = []
    for tr in smp.traces():
        c = lab.trace_condition_residuals(sc.map, tr, stride)
        res.append(max(c.max_vertical, c.max_horizontal))
    return CheckResult("geodesic_conditions", sc.name, [s.point.tolist() for s in smp.states], res, lab.CURVE_TOL, True)


def check_projected_geodesic(sc, smp, stride: int = 50) -> Optional[CheckResult]:
    if not smp.states:
        return None
    D = sc.dilation_field()
    reps = [lab.projected_geodesic_residual(sc.map, D, tr, stride) for tr in smp.traces()]
    res = [r.agreement_max for r in reps]
    detail = {"condition_max": max(r.residual for r in reps)}
    return CheckResult("projected_geodesic", sc.name, [s.point.tolist() for s in smp.states], res, SFF_TOL, True, detail)


def curvature_checks(sc, smp) -> tuple[list[CheckResult], Optional[str]]:
    """Vertical scalar curvature identity and, with declared Einstein fibers, the Ricci identity."""
    F = sc.map
    if F.fiber_dim < 2:
        return [], f"trivial identity: fibers of {sc.name} have dimension {F.fiber_dim}; curvature identities are vacuous"
    if sc.clairaut_f is None:
        return [], f"no potential f declared for {sc.name}; curvature identities skipped"
    D = sc.dilation_field()
    expect = sc.flags.expected_clairaut
    out = []
    reps = [lab.vertical_curvature_identity_residual(F, D, sc.clairaut_f, p) for p in smp.points]
    out.append(
        CheckResult(
            "vertical_curvature_identity", sc.name, smp.points.tolist(), [r.residual for r in reps], lab.IDENTITY_TOL, expect,
            {"terms": [dict(r.terms, lhs=r.lhs, rhs=r.rhs) for r in reps], "note": reps[0].note},
        )
    )
    if sc.einstein_lambda_f is not None:
        rows = []
        for p in smp.points:
            rows.append([lab.ricci_identity_residual(F, D, sc.clairaut_f, sc.einstein_lambda_f, p, i) for i in range(F.fiber_dim)])
        out.append(
            CheckResult(
                "ricci_identity", sc.name, smp.points.tolist(), [max(r.residual for r in row) for row in rows], lab.IDENTITY_TOL, expect,
                {"terms": [dict(row[0].terms, lhs=row[0].lhs, rhs=row[0].rhs) for row in rows]},
            )
        )
    return out, None


def basic_checks(sc, smp) -> list[CheckResult]:
    items = [
        check_conformality(sc, smp),
        check_umbilical(sc, smp),
        check_clairaut_condition(sc, smp),
        check_invariant_drift(sc, smp),
        check_speed(sc, smp),
        check_tension(sc, smp),
        check_harmonic(sc, smp),
    ]
    return [c for c in items if c is not None]


def full_checks(sc, smp) -> tuple[list[CheckResult], list[str]]:
    items = basic_checks(sc, smp)
    extra = [
        check_second_fundamental_form(sc, smp),
        check_a_formula(sc, smp),
        check_mean_curvature_formula(sc, smp),
        check_geodesic_conditions(sc, smp),
        check_projected_geodesic(sc, smp),
    ]
    items += [c for c in extra if c is not None]
    curv, note = curvature_checks(sc, smp)
    return items + curv, [note] if note else []


def config_json(config: RunConfig) -> dict:
    return {"points": config.points, "geodesics": config.geodesics, "step": config.step, "t_end": config.t_end, "seed": config.seed}


def document(command: str, sc: SubmersionScenario, config: RunConfig, checks: list[CheckResult], notes=()) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "command": command,
        "scenario": sc.name,
        "dims": {"total": sc.m, "base": sc.n},
        "config": config_json(config),
        "checks": [c.to_json() for c in checks],
        "notes": list(notes),
        "expectations_met": all(c.matches for c in checks),
    }


__all__ = ["RunConfig", "CheckResult", "Sampler", "basic_checks", "full_checks", "curvature_checks", "document"]
