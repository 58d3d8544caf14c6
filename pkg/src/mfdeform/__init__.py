"""Formal logarithmic deformations of modular forms at finite truncation
order: q-expansion arithmetic, iterated Eichler integrals, the restricted Lie
algebra of differential operators, deformation cocycles and sections, the
universal deformation family, and the canonical deformation operator."""

from .defalg import (
    DiffOp,
    LieClosureError,
    LieElement,
    PhiScaling,
    RhoSeriesOp,
    bch,
    bracket,
    compose,
    exp_op,
    inverse_op,
    log_op,
    monoid_act,
    phi_k,
    slash_eval,
    slash_group,
    slash_poly,
    solve_linear_coboundary,
)
from .deform import (
    DeformationPackage,
    canonical_deformation,
    deform_form,
    family_operator,
    first_order_data,
    lambda_combination,
    match_cocycles_order2,
    second_order_data,
    second_order_section_residual,
    verify_transformation,
)
from .groups import (
    DEFAULT_TAU_SAMPLES,
    GroupContext,
    GroupElement,
    InfeasibleSampleError,
    adjust_samples,
    adjust_tau,
    default_context,
    is_feasible,
    sample_feasible_pairs,
    sample_feasible_words,
)
from .mmv import (
    IteratedSeries,
    MMVKey,
    PrecisionError,
    canonical_cocycle,
    iterated_series,
    mmv_classical,
    mmv_functional,
    series_inverse,
    series_product,
    slash_tensor,
)
from .modforms import (
    CuspForm,
    cusp_form_from_eta,
    default_cusp_form,
    eichler_integral,
    eisenstein2_level,
    eta_product,
    period_polynomial,
)
from .qpoly import DegreeOverflowError, DivergentIntegralError, MixedExpansion

__version__ = "0.1.0"

__all__ = [
    "CuspForm",
    "DEFAULT_TAU_SAMPLES",
    "DeformationPackage",
    "DegreeOverflowError",
    "DiffOp",
    "DivergentIntegralError",
    "GroupContext",
    "GroupElement",
    "InfeasibleSampleError",
    "IteratedSeries",
    "LieClosureError",
    "LieElement",
    "MMVKey",
    "MixedExpansion",
    "PhiScaling",
    "PrecisionError",
    "RhoSeriesOp",
    "adjust_samples",
    "adjust_tau",
    "bch",
    "bracket",
    "canonical_cocycle",
    "canonical_deformation",
    "compose",
    "cusp_form_from_eta",
    "default_context",
    "default_cusp_form",
    "deform_form",
    "eichler_integral",
    "eisenstein2_level",
    "eta_product",
    "exp_op",
    "family_operator",
    "first_order_data",
    "inverse_op",
    "is_feasible",
    "iterated_series",
    "lambda_combination",
    "log_op",
    "match_cocycles_order2",
    "mmv_classical",
    "mmv_functional",
    "monoid_act",
    "period_polynomial",
    "phi_k",
    "sample_feasible_pairs",
    "sample_feasible_words",
    "second_order_data",
    "second_order_section_residual",
    "series_inverse",
    "series_product",
    "slash_eval",
    "slash_group",
    "slash_poly",
    "slash_tensor",
    "solve_linear_coboundary",
    "verify_transformation",
]
