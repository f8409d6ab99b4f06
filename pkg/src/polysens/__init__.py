"""Sensitivity analysis of discrete models through their interpolating polynomials."""

from .compilers import (
    BNSpec,
    DBNSpec,
    MergeGroup,
    MergeSpec,
    apply_merges,
    compile_bn,
    event_from_predicate,
    parse_event,
    unroll_dbn,
)
from .core import (
    Block,
    Indeterminate,
    Model,
    ModelError,
    Monomial,
    ParameterSpace,
    Polynomial,
    evaluate,
    is_multilinear,
    max_indeterminate_degree,
    restrict,
)
from .covariation import (
    CovariationScheme,
    Variation,
    apply_variation,
    check_properties,
    covary,
    custom_linear,
    linear_coefficients,
    make_request,
    order_preserving,
    proportional,
    uniform,
)
from .divergence import (
    PHI_PRESETS,
    DivergenceResult,
    PhiFunction,
    cd_atomic,
    cd_block,
    cd_general,
    cd_general_proportional_closed,
    cd_proportional_closed,
    phi_decomposition,
    phi_divergence,
)
from .modelfile import ModelFile, load_model, parse_model
from .oracle import (
    OptimalityVerdict,
    SimplexGrid,
    find_cd_counterexample,
    random_suite,
    verify_cd_optimality,
    verify_phi_optimality,
)
from .sensitivity import (
    PiecewisePolynomial,
    RationalSensitivity,
    linear_form,
    posterior_sensitivity,
    proportional_linear_form,
    sensitivity_function,
)

__all__ = [
    "apply_merges",
    "apply_variation",
    "Block",
    "BNSpec",
    "cd_atomic",
    "cd_block",
    "cd_general",
    "cd_general_proportional_closed",
    "cd_proportional_closed",
    "check_properties",
    "compile_bn",
    "CovariationScheme",
    "covary",
    "custom_linear",
    "DBNSpec",
    "DivergenceResult",
    "evaluate",
    "event_from_predicate",
    "find_cd_counterexample",
    "Indeterminate",
    "is_multilinear",
    "linear_coefficients",
    "linear_form",
    "load_model",
    "make_request",
    "max_indeterminate_degree",
    "MergeGroup",
    "MergeSpec",
    "Model",
    "ModelError",
    "ModelFile",
    "Monomial",
    "OptimalityVerdict",
    "order_preserving",
    "ParameterSpace",
    "parse_event",
    "parse_model",
    "phi_decomposition",
    "phi_divergence",
    "PHI_PRESETS",
    "PhiFunction",
    "PiecewisePolynomial",
    "Polynomial",
    "posterior_sensitivity",
    "proportional",
    "proportional_linear_form",
    "random_suite",
    "RationalSensitivity",
    "restrict",
    "sensitivity_function",
    "SimplexGrid",
    "uniform",
    "unroll_dbn",
    "Variation",
    "verify_cd_optimality",
    "verify_phi_optimality",
]

__version__ = "0.1.0"
