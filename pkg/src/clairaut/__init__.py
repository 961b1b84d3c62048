"""Numerical toolkit for conformal submersions and the Clairaut property of their geodesics."""
from .errors import *  # noqa: F401,F403
from .expr import Expression, differentiate, parse_expression
from .geometry import (
    ChartManifold,
    ChristoffelTensor,
    MetricField,
    ScalarField,
    TangentVector,
    VectorField,
    christoffel,
    covariant_derivative,
    divergence,
    gradient,
    hessian,
    laplacian,
    metric_inner,
    riemann_curvature,
    sectional_curvature,
)
from .geodesic import GeodesicState, GeodesicTrace, exponential_map, geodesic_rhs, integrate
from .submersion import (
    DilationField,
    SmoothSubmersionMap,
    VerticalHorizontalSplit,
    a_formula_residual,
    check_conformal,
    harmonicity_check,
    mean_curvature,
    second_fundamental_form,
    split,
    tension_field,
    tensor_A,
    tensor_T,
    umbilical_residual,
)
from .lab import (
    angle_omega,
    clairaut_condition_residual,
    clairaut_invariant_trace,
    geodesic_condition_residuals,
    infer_mean_curvature_potential,
    mean_curvature_formula_check,
    projected_geodesic_residual,
    ricci_identity_residual,
    vertical_curvature_identity_residual,
    vertical_scalar_curvature,
)
from .scenarios import (
    SubmersionScenario,
    build_doubly_warped,
    build_example2,
    build_surface_of_revolution,
    get_scenario,
    load_scenario,
    scenario_names,
)

__version__ = "0.1.0"
