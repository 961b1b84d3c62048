"""Submersion scenarios: declarative specs, built-in registry and the text file format.

A scenario file is line oriented::

    name = example2
    [total]
    dim = 2
    g_1_1 = exp(2*x2)
    [base]
    dim = 1
    g_1_1 = 1
    [map]
    y1 = (x1 + x2)/sqrt(2)
    [frames]
    vertical_1 = exp(-x2), -exp(-x2)
    horizontal_1 = 1/sqrt(2), 1/sqrt(2)
    [dilation]
    lambda = exp(-x2)
    [clairaut]
    f = x1 + x2
    [flags]
    clairaut = true
    [sample_box]
    x1 = -1, 1

Total-space expressions use x1..xm, base metric entries use y1..yn.  Omitted
off-diagonal metric entries are 0 and a single g_i_j also defines g_j_i.
Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (
    DegenerateFrameError,
    DomainError,
    EvaluationError,
    ExpressionSyntaxError,
    NotASubmersionError,
    ScenarioError,
    ScenarioValidationError,
    SingularMetricError,
    UnknownIdentifierError,
)
from .expr import ONE, ZERO, Expression, as_expression, call, coordinate_names, parse_expression
from .fields import map_from_expressions, metric_from_expressions, scalar_field_from_expression, vector_field_from_expressions
from .geometry import ChartManifold, ScalarField, inner
from .submersion import DilationField, SmoothSubmersionMap, basic_defect, estimated_square_dilation

VALIDATION_POINTS = 16
SECTIONS = ("total", "base", "map", "frames", "dilation", "clairaut", "flags", "sample_box")
BOOL_FLAGS = ("conformal", "clairaut", "umbilical", "harmonic")

Matrix = list  # list of lists of Expression


@dataclass(frozen=True)
class ScenarioFlags:
    expected_conformal: Optional[bool] = None
    expected_clairaut: Optional[bool] = None
    expected_umbilical: Optional[bool] = None
    expected_harmonic: Optional[bool] = None
    einstein_lambda_f: Optional[Expression] = None


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative, expression-level description of a scenario."""

    name: str
    total_metric: Matrix
    base_metric: Matrix
    map: list
    vertical: list
    horizontal: list
    sample_box: tuple
    dilation: Optional[Expression] = None
    clairaut_f: Optional[Expression] = None
    flags: ScenarioFlags = ScenarioFlags()
    description: str = ""

    @property
    def m(self) -> int:
        return len(self.total_metric)

    @property
    def n(self) -> int:
        return len(self.base_metric)


@dataclass(frozen=True, eq=False)
class SubmersionScenario:
    name: str
    spec: ScenarioSpec
    total: ChartManifold
    base: ChartManifold
    map: SmoothSubmersionMap
    dilation: Optional[DilationField]
    clairaut_f: Optional[ScalarField]
    flags: ScenarioFlags
    sample_box: np.ndarray  # (m, 2)
    einstein_lambda_f: Optional[ScalarField] = None

    @property
    def m(self) -> int:
        return self.total.dim

    @property
    def n(self) -> int:
        return self.base.dim

    def dilation_field(self) -> DilationField:
        """Analytic dilation if declared, else the pointwise estimate."""
        if self.dilation is not None:
            return self.dilation
        from .submersion import estimated_dilation

        return estimated_dilation(self.map)

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.sample_box[:, 0], self.sample_box[:, 1]
        return lo + (hi - lo) * rng.random((count, self.m))

    def validation_points(self, count: int = VALIDATION_POINTS) -> np.ndarray:
        return halton_points(self.name, self.sample_box, count)


def halton_points(name: str, box: np.ndarray, count: int) -> np.ndarray:
    """Deterministic scrambled Halton points in ``box``, seeded by a hash of ``name``."""
    box = np.asarray(box, dtype=float)
    sampler = qmc.Halton(d=box.shape[0], scramble=True, seed=zlib.crc32(name.encode("utf-8")))
    return qmc.scale(sampler.random(count), box[:, 0], box[:, 1])


# -- building ----------------------------------------------------------------------

def _matrix(entries) -> Matrix:
    return [[as_expression(e) for e in row] for row in entries]


def diagonal(entries) -> Matrix:
    k = len(entries)
    return [[as_expression(entries[i]) if i == j else ZERO for j in range(k)] for i in range(k)]


def build_scenario(spec: ScenarioSpec) -> SubmersionScenario:
    m, n = spec.m, spec.n
    xs, ys = coordinate_names("x", m), coordinate_names("y", n)
    total = ChartManifold(m, metric_from_expressions(spec.total_metric, xs), spec.name)
    base = ChartManifold(n, metric_from_expressions(spec.base_metric, ys), f"{spec.name}/base")
    F_eval, F_jac = map_from_expressions(spec.map, xs)
    vfr = [vector_field_from_expressions(c, xs, f"V{i + 1}") for i, c in enumerate(spec.vertical)]
    hfr = [vector_field_from_expressions(c, xs, f"H{j + 1}") for j, c in enumerate(spec.horizontal)]
    F = SmoothSubmersionMap(total, base, F_eval, F_jac, vfr, hfr, spec.name)
    dil = None
    if spec.dilation is not None:
        dil = DilationField(scalar_field_from_expression(spec.dilation, xs, "lambda"), analytic=True)
    f = None if spec.clairaut_f is None else scalar_field_from_expression(spec.clairaut_f, xs, "f")
    lam_f = None
    if spec.flags.einstein_lambda_f is not None:
        lam_f = scalar_field_from_expression(spec.flags.einstein_lambda_f, xs, "lambda_f")
    box = np.array(spec.sample_box, dtype=float).reshape(m, 2)
    return SubmersionScenario(spec.name, spec, total, base, F, dil, f, spec.flags, box, lam_f)


def _spec_euclidean_product() -> ScenarioSpec:
    return ScenarioSpec(
        name="euclidean_product",
        total_metric=diagonal([1, 1]),
        base_metric=diagonal([1]),
        map=[parse_expression("x1")],
        vertical=[[ZERO, ONE]],
        horizontal=[[ONE, ZERO]],
        sample_box=((-1.0, 1.0), (-1.0, 1.0)),
        dilation=ONE,
        clairaut_f=ZERO,
        flags=ScenarioFlags(True, True, True, True),
        description="Euclidean plane projected onto the first axis",
    )


def _spec_flat_product_4d() -> ScenarioSpec:
    return ScenarioSpec(
        name="flat_product_4d",
        total_metric=diagonal([1, 1, 1, 1]),
        base_metric=diagonal([1, 1]),
        map=[parse_expression("x1"), parse_expression("x2")],
        vertical=[[ZERO, ZERO, ONE, ZERO], [ZERO, ZERO, ZERO, ONE]],
        horizontal=[[ONE, ZERO, ZERO, ZERO], [ZERO, ONE, ZERO, ZERO]],
        sample_box=((-1.0, 1.0),) * 4,
        dilation=ONE,
        clairaut_f=ZERO,
        flags=ScenarioFlags(True, True, True, True, ZERO),
        description="R^4 projected onto R^2 with flat two-dimensional fibers",
    )


def _spec_example2() -> ScenarioSpec:
    P = parse_expression
    return ScenarioSpec(
        name="example2",
        total_metric=diagonal(["exp(2*x2)", "exp(2*x2)"]),
        base_metric=diagonal([1]),
        map=[P("(x1 + x2)/sqrt(2)")],
        vertical=[[P("exp(-x2)"), P("-exp(-x2)")]],
        horizontal=[[P("1/sqrt(2)"), P("1/sqrt(2)")]],
        sample_box=((-1.0, 1.0), (-1.0, 1.0)),
        dilation=P("exp(-x2)"),
        clairaut_f=P("x1 + x2"),
        flags=ScenarioFlags(True, True, True, False),
        description="conformally flat plane mapped onto the line (x1 + x2)/sqrt(2)",
    )


def _spec_perturbed_nonclairaut() -> ScenarioSpec:
    P = parse_expression
    return ScenarioSpec(
        name="perturbed_nonclairaut",
        total_metric=diagonal(["exp(2*x2)*(1 + 0.1*sin(x1))", "exp(2*x2)"]),
        base_metric=diagonal([1]),
        map=[P("(x1 + x2)/sqrt(2)")],
        vertical=[[ONE, P("-1")]],
        horizontal=[[P("sqrt(2)/(2 + 0.1*sin(x1))"), P("sqrt(2)*(1 + 0.1*sin(x1))/(2 + 0.1*sin(x1))")]],
        sample_box=((-1.0, 1.0), (-1.0, 1.0)),
        dilation=None,
        clairaut_f=P("x1^2"),
        flags=ScenarioFlags(True, False, True, None),
        description="perturbed conformally flat plane; negative control for the Clairaut checks",
    )


def _rename_block(e: Expression, offset: int, count: int) -> Expression:
    return e.rename({f"x{i + 1}": f"x{offset + i + 1}" for i in range(count)})


def doubly_warped_spec(
    g1: Sequence[Sequence],
    g2: Sequence[Sequence],
    f1,
    lam,
    name: str = "doubly_warped",
    box1: Optional[Sequence] = None,
    box2: Optional[Sequence] = None,
    einstein_lambda_f=None,
) -> ScenarioSpec:
    """Doubly warped product lam(q)^2 g1 + f1(p)^2 g2 projected onto the first factor.

    ``g1``, ``f1`` and ``einstein_lambda_f`` use x1..xa; ``g2`` and ``lam`` use the
    second factor's own coordinates x1..xb and are shifted to x(a+1)..x(a+b).
    """
    G1, G2 = _matrix(g1), _matrix(g2)
    a, b = len(G1), len(G2)
    f1 = as_expression(f1)
    lam = _rename_block(as_expression(lam), a, b)
    G2 = [[_rename_block(e, a, b) for e in row] for row in G2]
    box1 = tuple(box1 or ((-1.0, 1.0),) * a)
    box2 = tuple(box2 or ((-1.0, 1.0),) * b)
    box = box1 + box2
    _require_positive({"f1": f1, "lam": lam}, a + b, np.array(box, dtype=float), name)
    total = [[ZERO] * (a + b) for _ in range(a + b)]
    lam2, f12 = lam ** 2, f1 ** 2
    for i in range(a):
        for j in range(a):
            total[i][j] = lam2 * G1[i][j]
    for i in range(b):
        for j in range(b):
            total[a + i][a + j] = f12 * G2[i][j]
    base = [[e.rename({f"x{k + 1}": f"y{k + 1}" for k in range(a)}) for e in row] for row in G1]
    axes = [[ONE if k == i else ZERO for k in range(a + b)] for i in range(a + b)]
    lam_const = lam.is_constant
    lam_f = None if einstein_lambda_f is None else as_expression(einstein_lambda_f)
    return ScenarioSpec(
        name=name,
        total_metric=total,
        base_metric=base,
        map=[parse_expression(f"x{i + 1}") for i in range(a)],
        vertical=axes[a:],
        horizontal=axes[:a],
        sample_box=box,
        dilation=ONE / lam,
        clairaut_f=call("log", f1),
        flags=ScenarioFlags(
            expected_conformal=True,
            expected_clairaut=lam_const,
            expected_umbilical=True,
            expected_harmonic=f1.is_constant if lam_const else None,
            einstein_lambda_f=lam_f,
        ),
        description="doubly warped product projected onto its first factor",
    )


def _require_positive(named: dict, dim: int, box: np.ndarray, name: str):
    from .expr import compile_scalar

    xs = coordinate_names("x", dim)
    for label, e in named.items():
        fn = compile_scalar(e, xs)
        for p in halton_points(name + label, box, 64):
            try:
                v = fn(p)
            except EvaluationError as exc:
                raise DomainError(f"{label} is undefined at {list(p)}: {exc}") from None
            if not v > 0:
                raise DomainError(f"{label} must be positive on the sample box; {label}({list(p)}) = {v}")


def build_doubly_warped(g1, g2, f1, lam, name: str = "doubly_warped", **kw) -> SubmersionScenario:
    return build_scenario(doubly_warped_spec(g1, g2, f1, lam, name, **kw))


def _spec_doubly_warped_default() -> ScenarioSpec:
    return doubly_warped_spec(
        diagonal([1, 1]), diagonal([1]), "2 + sin(x1) + 0.5*x2^2", "1.5", "doubly_warped_default"
    )


def _spec_doubly_warped_general() -> ScenarioSpec:
    return doubly_warped_spec(
        diagonal([1, 1]), diagonal([1]), "2 + sin(x1) + 0.5*x2^2", "1.2 + 0.3*sin(x1)", "doubly_warped_general"
    )


def _spec_doubly_warped_4d() -> ScenarioSpec:
    return doubly_warped_spec(
        diagonal([1, 1]),
        diagonal([1, "sin(x1)^2"]),
        "2.5 + 0.5*sin(x1) + 0.2*x2^2",
        "1",
        "doubly_warped_4d",
        box2=((1.0, 2.1), (-1.0, 1.0)),
        einstein_lambda_f="1/(2.5 + 0.5*sin(x1) + 0.2*x2^2)^2",
    )


def surface_of_revolution_spec(profile, name: str = "surface_of_revolution", box=None) -> ScenarioSpec:
    """Metric dt^2 + r(t)^2 dphi^2 (t = x1, phi = x2) projected onto the t axis."""
    r = as_expression(profile)
    if r.variables() - {"x1"}:
        raise DomainError("profile may only depend on x1")
    box = tuple(box or ((-1.0, 1.0), (-math.pi, math.pi)))
    _require_positive({"r": r}, 2, np.array(box, dtype=float), name)
    return ScenarioSpec(
        name=name,
        total_metric=diagonal([ONE, r ** 2]),
        base_metric=diagonal([1]),
        map=[parse_expression("x1")],
        vertical=[[ZERO, ONE]],
        horizontal=[[ONE, ZERO]],
        sample_box=box,
        dilation=ONE,
        clairaut_f=call("log", r),
        flags=ScenarioFlags(True, True, True, r.is_constant),
        description="surface of revolution projected onto its meridian coordinate",
    )


def build_surface_of_revolution(profile, name: str = "surface_of_revolution", box=None) -> SubmersionScenario:
    return build_scenario(surface_of_revolution_spec(profile, name, box))


def build_example2() -> SubmersionScenario:
    return build_scenario(_spec_example2())


def build_euclidean_product() -> SubmersionScenario:
    return build_scenario(_spec_euclidean_product())


def build_perturbed_nonclairaut() -> SubmersionScenario:
    return build_scenario(_spec_perturbed_nonclairaut())


_REGISTRY: dict[str, Callable[[], ScenarioSpec]] = {
    "doubly_warped_4d": _spec_doubly_warped_4d,
    "doubly_warped_default": _spec_doubly_warped_default,
    "doubly_warped_general": _spec_doubly_warped_general,
    "euclidean_product": _spec_euclidean_product,
    "example2": _spec_example2,
    "flat_product_4d": _spec_flat_product_4d,
    "perturbed_nonclairaut": _spec_perturbed_nonclairaut,
    "surface_of_revolution_default": lambda: surface_of_revolution_spec("(exp(x1) + exp(-x1))/2", "surface_of_revolution_default"),
}
_BUILT: dict[str, SubmersionScenario] = {}


def scenario_names() -> list[str]:
    return sorted(_REGISTRY)


def registry_spec(name: str) -> ScenarioSpec:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; available: {', '.join(scenario_names())}") from None


def get_scenario(name: str) -> SubmersionScenario:
    if name not in _BUILT:
        _BUILT[name] = build_scenario(registry_spec(name))
    return _BUILT[name]


# -- validation ----------------------------------------------------------------------

def validate_scenario(sc: SubmersionScenario, points: Optional[np.ndarray] = None) -> SubmersionScenario:
    """Check every type invariant at deterministic points; raise naming the first violation."""
    spec = sc.spec
    if spec.flags.expected_clairaut and spec.clairaut_f is None:
        raise ScenarioValidationError("a Clairaut scenario must declare f", detail="flags")
    pts = sc.validation_points() if points is None else points
    F = sc.map
    for p in pts:
        try:
            g = sc.total.metric(p)
        except SingularMetricError as exc:
            raise ScenarioValidationError("total metric evaluable", p, str(exc)) from None
        if np.max(np.abs(g - g.T)) > 1e-12:
            raise ScenarioValidationError("metric symmetry", p)
        if not np.all(np.linalg.eigvalsh(g) > 0):
            raise ScenarioValidationError("positive-definite total metric", p, f"eigenvalues {np.linalg.eigvalsh(g)}")
        try:
            q = F(p)
            gb = sc.base.metric(q)
        except (SingularMetricError, EvaluationError) as exc:
            raise ScenarioValidationError("base metric evaluable", p, str(exc)) from None
        if not np.all(np.linalg.eigvalsh(gb) > 0):
            raise ScenarioValidationError("positive-definite base metric", p)
        try:
            sp = F.split_at(p)
        except NotASubmersionError as exc:
            raise ScenarioValidationError("full-rank differential", p, str(exc)) from None
        except DegenerateFrameError as exc:
            raise ScenarioValidationError("independent frame fields", p, str(exc)) from None
        J = F.J(p)
        for U in F.vertical_frame:
            u = U(p)
            if np.linalg.norm(J @ u) > 1e-9 * max(1.0, np.linalg.norm(J) * np.linalg.norm(u)):
                raise ScenarioValidationError("vertical frame lies in the kernel of the differential", p)
            for X in F.horizontal_frame:
                x = X(p)
                scale = max(1.0, np.sqrt(inner(sc.total, p, u, u) * inner(sc.total, p, x, x)))
                if abs(inner(sc.total, p, u, x)) > 1e-9 * scale:
                    raise ScenarioValidationError("horizontal frame is g-orthogonal to the vertical frame", p)
        for X in F.horizontal_frame:
            if basic_defect(F, X, p) > 1e-6 * max(1.0, F.base_norm(p, F.push(p, X(p)))):
                raise ScenarioValidationError("horizontal frame is basic", p)
        if sc.dilation is not None:
            lam = sc.dilation.field(p)
            if not lam > 0:
                raise ScenarioValidationError("positive dilation", p)
            if spec.flags.expected_conformal:
                lam2 = estimated_square_dilation(F, p)
                if abs(lam * lam - lam2) > 1e-8 * max(1.0, lam2):
                    raise ScenarioValidationError("declared dilation matches the map", p, f"{lam * lam} vs {lam2}")
        elif not estimated_square_dilation(F, p) > 0:
            raise ScenarioValidationError("positive dilation", p)
        if sc.clairaut_f is not None:
            try:
                sc.clairaut_f(p)
            except EvaluationError as exc:
                raise ScenarioValidationError("f evaluable", p, str(exc)) from None
    return sc


# -- file format -----------------------------------------------------------------------

_FALSE_TRUE = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _fmt_bool(v: Optional[bool]) -> Optional[str]:
    return None if v is None else ("true" if v else "false")


def serialize_scenario(spec: ScenarioSpec) -> str:
    out = [f"name = {spec.name}"]
    if spec.description:
        out.append(f"description = {spec.description}")

    def metric(section, M):
        out.append("")
        out.append(f"[{section}]")
        out.append(f"dim = {len(M)}")
        for i in range(len(M)):
            for j in range(i, len(M)):
                if M[i][j] != ZERO or i == j:
                    out.append(f"g_{i + 1}_{j + 1} = {M[i][j]}")

    metric("total", spec.total_metric)
    metric("base", spec.base_metric)
    out += ["", "[map]"] + [f"y{i + 1} = {e}" for i, e in enumerate(spec.map)]
    out += ["", "[frames]"]
    out += [f"vertical_{i + 1} = " + ", ".join(map(str, c)) for i, c in enumerate(spec.vertical)]
    out += [f"horizontal_{j + 1} = " + ", ".join(map(str, c)) for j, c in enumerate(spec.horizontal)]
    if spec.dilation is not None:
        out += ["", "[dilation]", f"lambda = {spec.dilation}"]
    if spec.clairaut_f is not None:
        out += ["", "[clairaut]", f"f = {spec.clairaut_f}"]
    out += ["", "[flags]"]
    fl = spec.flags
    for key, val in zip(BOOL_FLAGS, (fl.expected_conformal, fl.expected_clairaut, fl.expected_umbilical, fl.expected_harmonic)):
        if val is not None:
            out.append(f"{key} = {_fmt_bool(val)}")
    if fl.einstein_lambda_f is not None:
        out.append(f"einstein_lambda_f = {fl.einstein_lambda_f}")
    out += ["", "[sample_box]"]
    out += [f"x{i + 1} = {float(lo)!r}, {float(hi)!r}" for i, (lo, hi) in enumerate(spec.sample_box)]
    return "\n".join(out) + "\n"


_KEY_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*?)\s*$")
_SECTION_LINE = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")


def _read_sections(text: str) -> dict:
    sections: dict[str, dict[str, tuple[str, int]]] = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION_LINE.match(line)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise ScenarioError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ScenarioError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        m = _KEY_LINE.match(line)
        if not m:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        key, value = m.group(1), m.group(2)
        if key in sections[current]:
            raise ScenarioError(f"duplicate key {key!r}", lineno)
        sections[current][key] = (value, lineno)
    return sections


def _expr(value: str, lineno: int, variables: Sequence[str]) -> Expression:
    try:
        return parse_expression(value, variables)
    except (ExpressionSyntaxError, UnknownIdentifierError) as exc:
        raise ScenarioError(str(exc), lineno) from None


def _dim(sec: dict, name: str) -> int:
    if "dim" not in sec:
        raise ScenarioError(f"[{name}] is missing 'dim'")
    value, lineno = sec["dim"]
    try:
        d = int(value)
    except ValueError:
        raise ScenarioError(f"dim must be an integer, got {value!r}", lineno) from None
    if d < 1:
        raise ScenarioError("dim must be positive", lineno)
    return d


def _metric(sec: dict, name: str, dim: int, variables) -> Matrix:
    M: list[list[Optional[Expression]]] = [[None] * dim for _ in range(dim)]
    key_re = re.compile(r"^g_(\d+)_(\d+)$")
    for key, (value, lineno) in sec.items():
        if key == "dim":
            continue
        km = key_re.match(key)
        if not km:
            raise ScenarioError(f"unexpected key {key!r} in [{name}]", lineno)
        i, j = int(km.group(1)) - 1, int(km.group(2)) - 1
        if not (0 <= i < dim and 0 <= j < dim):
            raise ScenarioError(f"{key} is outside a {dim}x{dim} metric", lineno)
        M[i][j] = _expr(value, lineno, variables)
    for i in range(dim):
        if M[i][i] is None:
            raise ScenarioError(f"[{name}] is missing diagonal entry g_{i + 1}_{i + 1}")
        for j in range(i + 1, dim):
            a, b = M[i][j], M[j][i]
            if a is not None and b is not None and a != b:
                raise ScenarioValidationError(
                    "metric symmetry", detail=f"[{name}] g_{i + 1}_{j + 1} = {a} but g_{j + 1}_{i + 1} = {b}"
                )
            e = a if a is not None else (b if b is not None else ZERO)
            M[i][j] = M[j][i] = e
    return M  # type: ignore[return-value]


def _vector(value: str, lineno: int, dim: int, variables) -> list:
    parts = [s.strip() for s in value.split(",")]
    if len(parts) != dim:
        raise ScenarioError(f"expected {dim} comma-separated components, got {len(parts)}", lineno)
    return [_expr(s, lineno, variables) for s in parts]


def parse_scenario(text: str) -> ScenarioSpec:
    sec = _read_sections(text)
    pre = sec[""]
    for key, (_, lineno) in pre.items():
        if key not in ("name", "description"):
            raise ScenarioError(f"unexpected key {key!r} before the first section", lineno)
    if "name" not in pre or not pre["name"][0]:
        raise ScenarioError("scenario must declare a name")
    name = pre["name"][0]
    if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9.-]*", name):
        raise ScenarioError(f"invalid scenario name {name!r}", pre["name"][1])
    for required in ("total", "base", "map", "frames", "sample_box"):
        if required not in sec:
            raise ScenarioError(f"missing section [{required}]")
    m = _dim(sec["total"], "total")
    n = _dim(sec["base"], "base")
    if not n < m:
        raise ScenarioError("base dimension must be smaller than total dimension")
    xs, ys = coordinate_names("x", m), coordinate_names("y", n)
    total = _metric(sec["total"], "total", m, xs)
    base = _metric(sec["base"], "base", n, ys)

    def indexed(section: str, prefix: str, count: int, parse) -> list:
        items = {}
        for key, (value, lineno) in sec[section].items():
            km = re.fullmatch(rf"{prefix}(\d+)", key)
            if not km:
                continue
            idx = int(km.group(1))
            if not 1 <= idx <= count:
                raise ScenarioError(f"{key} is out of range (expected 1..{count})", lineno)
            items[idx] = parse(value, lineno)
        missing = [f"{prefix}{i}" for i in range(1, count + 1) if i not in items]
        if missing:
            raise ScenarioError(f"[{section}] is missing {', '.join(missing)}")
        return [items[i] for i in range(1, count + 1)]

    for section, allowed in (("map", r"y\d+"), ("frames", r"(vertical|horizontal)_\d+")):
        for key, (_, lineno) in sec[section].items():
            if not re.fullmatch(allowed, key):
                raise ScenarioError(f"unexpected key {key!r} in [{section}]", lineno)
    fmap = indexed("map", "y", n, lambda v, ln: _expr(v, ln, xs))
    vertical = indexed("frames", "vertical_", m - n, lambda v, ln: _vector(v, ln, m, xs))
    horizontal = indexed("frames", "horizontal_", n, lambda v, ln: _vector(v, ln, m, xs))

    def single(section: str, key: str) -> Optional[Expression]:
        if section not in sec:
            return None
        for k, (_, lineno) in sec[section].items():
            if k != key:
                raise ScenarioError(f"unexpected key {k!r} in [{section}]", lineno)
        if key not in sec[section]:
            return None
        value, lineno = sec[section][key]
        return _expr(value, lineno, xs)

    dilation = single("dilation", "lambda")
    f = single("clairaut", "f")
    flags_raw = sec.get("flags", {})
    kw: dict = {}
    for key, (value, lineno) in flags_raw.items():
        if key in BOOL_FLAGS:
            v = value.strip().lower()
            if v in ("", "none", "unknown"):
                kw[f"expected_{key}"] = None
            elif v in _FALSE_TRUE:
                kw[f"expected_{key}"] = _FALSE_TRUE[v]
            else:
                raise ScenarioError(f"flag {key} must be true or false, got {value!r}", lineno)
        elif key == "einstein_lambda_f":
            kw[key] = _expr(value, lineno, xs)
        else:
            raise ScenarioError(f"unknown flag {key!r}", lineno)
    box = []
    boxsec = sec["sample_box"]
    for i, x in enumerate(xs):
        if x not in boxsec:
            raise ScenarioError(f"[sample_box] is missing {x}")
        value, lineno = boxsec[x]
        parts = [s.strip() for s in value.split(",")]
        try:
            lo, hi = (float(s) for s in parts)
        except ValueError:
            raise ScenarioError(f"{x} range must be 'lo, hi'", lineno) from None
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ScenarioError(f"{x} range must satisfy lo < hi", lineno)
        box.append((lo, hi))
    for key, (_, lineno) in boxsec.items():
        if key not in xs:
            raise ScenarioError(f"unexpected key {key!r} in [sample_box]", lineno)
    return ScenarioSpec(
        name=name,
        total_metric=total,
        base_metric=base,
        map=fmap,
        vertical=vertical,
        horizontal=horizontal,
        sample_box=tuple(box),
        dilation=dilation,
        clairaut_f=f,
        flags=ScenarioFlags(**kw),
        description=pre.get("description", ("", 0))[0],
    )


def load_scenario_text(text: str) -> SubmersionScenario:
    return validate_scenario(build_scenario(parse_scenario(text)))


def load_scenario(path) -> SubmersionScenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    return load_scenario_text(text)


def shipped_scenario_path(name: str = "example2") -> Path:
    return Path(__file__).with_name("data") / f"{name}.scenario"
