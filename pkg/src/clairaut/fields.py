"""Build geometry objects from expression trees, with exact symbolic derivatives."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .expr import Expression, as_expression, compile_array, compile_program, compile_scalar, differentiate
from .geometry import MetricField, ScalarField, VectorField


def _exprs(items):
    return [as_expression(e) for e in items]


def metric_from_expressions(entries: Sequence[Sequence], names: Sequence[str]) -> MetricField:
    """``entries[i][j]`` are the metric components; they must be symmetric as trees or values."""
    m = len(names)
    g = [_exprs(row) for row in entries]
    if len(g) != m or any(len(r) != m for r in g):
        raise ValueError("metric must be a square matrix matching the coordinate count")
    partials = [[[differentiate(g[i][j], names[k]) for k in range(m)] for j in range(m)] for i in range(m)]
    flat = [g[i][j] for i in range(m) for j in range(m)]
    flat += [partials[i][j][k] for i in range(m) for j in range(m) for k in range(m)]
    return MetricField(
        m,
        compile_array(g, names),
        compile_array(partials, names),
        program=compile_program(flat, names),
    )


def vector_field_from_expressions(components: Sequence, names: Sequence[str], name: str = "") -> VectorField:
    comps = _exprs(components)
    jac = [[differentiate(c, v) for v in names] for c in comps]
    return VectorField(compile_array(comps, names), name, compile_array(jac, names))


def scalar_field_from_expression(e, names: Sequence[str], name: str = "") -> ScalarField:
    e = as_expression(e)
    grad = [differentiate(e, v) for v in names]
    return ScalarField(compile_scalar(e, names), compile_array(grad, names), name or str(e))


def map_from_expressions(components: Sequence, names: Sequence[str]):
    """Returns (eval, jacobian) callables for a map given by component expressions."""
    comps = _exprs(components)
    jac = [[differentiate(c, v) for v in names] for c in comps]
    return compile_array(comps, names), compile_array(jac, names)


def evaluate_all(exprs: Sequence[Expression], names: Sequence[str], x) -> np.ndarray:
    return compile_array(list(exprs), names)(x)
