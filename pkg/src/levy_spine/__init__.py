"""Spines, Wiener--Hopf factors and spectral formulas for Lévy processes with completely monotone jumps."""

from .eigen import EigenData, eval_F_minus, eval_F_plus, eval_G, laplace_F_minus, laplace_F_plus, make_eigen
from .numerics import Tolerance
from .process import (
    CustomComplexFn,
    ExpComponent,
    ProcessSpec,
    RogersFn,
    Stable,
    StableDrift,
    build_rogers,
    check_rogers,
    dual_spec,
    eval_f,
)
from .spectral import (
    AssumptionReport,
    SpectralResult,
    check_assumptions,
    heat_kernel,
    inf_tail,
    laplace_identity,
    pecherskii_check,
    sup_cdf,
)
from .spine import SpinePoint, dist_to_spine, spine_point, spine_table, z_segments
from .wiener_hopf import WhFactors, quotient_fn, wh_factorize, wh_product_spine

__all__ = [
    "AssumptionReport",
    "CustomComplexFn",
    "EigenData",
    "ExpComponent",
    "ProcessSpec",
    "RogersFn",
    "SpectralResult",
    "SpinePoint",
    "Stable",
    "StableDrift",
    "Tolerance",
    "WhFactors",
    "build_rogers",
    "check_assumptions",
    "check_rogers",
    "dist_to_spine",
    "dual_spec",
    "eval_F_minus",
    "eval_F_plus",
    "eval_G",
    "eval_f",
    "heat_kernel",
    "inf_tail",
    "laplace_F_minus",
    "laplace_F_plus",
    "laplace_identity",
    "make_eigen",
    "pecherskii_check",
    "quotient_fn",
    "spine_point",
    "spine_table",
    "sup_cdf",
    "wh_factorize",
    "wh_product_spine",
    "z_segments",
]
