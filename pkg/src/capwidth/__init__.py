"""Numerical laboratory for symplectic capacity versus mean width.

The package measures mean widths and quermassintegrals of convex bodies
by sphere quadrature and Steiner-polynomial fitting, estimates the
smallest-action closed characteristic cost with a loop minimizer, and
probes whether products of balls minimize mean width inside their
symplectic orbit.  `verify.verify_all` runs the headline checks end to
end; the `capwidth` console script exposes each experiment.
"""
from .bodies import (
    BallProductSpec,
    BodyError,
    SupportBody,
    ball,
    ball_product_body,
    bidisk_spec,
    cube,
    ellipsoid,
    linear_image,
    minkowski_sum,
    polydisk,
    polydisk_spec,
    scale_body,
    square,
    square_disk_spec,
    standard_bodies,
    superellipse,
)
from .capacity import CapacityResult, eh_capacity_estimate, inequality_suite
from .experiments import (
    build_area_map,
    calibrate_prefactor,
    green_test,
    naive_extension_probe,
    nonlinear_flow_check,
    product_formula_report,
    product_mean_width,
    rounded_product_test,
    squash_family,
)
from .grammar import GrammarError, parse_body
from .sphere import Estimate, SphereSampler, mean_width, mean_width_2d
from .steiner import SteinerFit, f_functions, quermass_capacity_scan, steiner_fit
from .symplectic import (
    LocalMinReport,
    local_search,
    product_first_variation,
    verify_local_min,
)
from .verify import VerifyContext, verify_all

__version__ = "0.1.0"

__all__ = [
    "BallProductSpec",
    "BodyError",
    "CapacityResult",
    "Estimate",
    "GrammarError",
    "LocalMinReport",
    "SphereSampler",
    "SteinerFit",
    "SupportBody",
    "VerifyContext",
    "ball",
    "ball_product_body",
    "bidisk_spec",
    "build_area_map",
    "calibrate_prefactor",
    "cube",
    "eh_capacity_estimate",
    "ellipsoid",
    "f_functions",
    "green_test",
    "inequality_suite",
    "linear_image",
    "local_search",
    "mean_width",
    "mean_width_2d",
    "minkowski_sum",
    "naive_extension_probe",
    "nonlinear_flow_check",
    "parse_body",
    "polydisk",
    "polydisk_spec",
    "product_first_variation",
    "product_formula_report",
    "product_mean_width",
    "quermass_capacity_scan",
    "rounded_product_test",
    "scale_body",
    "square",
    "square_disk_spec",
    "squash_family",
    "standard_bodies",
    "steiner_fit",
    "superellipse",
    "verify_all",
    "verify_local_min",
]
