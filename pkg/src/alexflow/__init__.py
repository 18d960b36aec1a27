"""Discrete-time gradient flows of convex functions on Alexandrov spaces.

Model spaces (euclidean, spheres, hyperbolic spaces, spiders), K-convex
functionals, resolvent steps, proximal-point flows and their stochastic
counterparts, each iteration logged with residuals of the inequalities it
is meant to satisfy.
"""

from .errors import (
    AlexflowError,
    ConvergenceFailure,
    InvalidArgument,
    NonUniqueGeodesic,
    OutOfRegionWarning,
    UnsupportedSpace,
)
from .flows import (
    MeasureSpec,
    RunRecord,
    cyclic_ppa,
    envelope_kconvex,
    expectation_and_variance,
    inductive_mean,
    jensen_run,
    ppa,
    stochastic_ppa,
)
from .functionals import (
    FunctionalSpec,
    affine,
    directional_derivative,
    distance_power,
    evaluate,
    gradient_of_minus_f,
    squared_distance,
    weighted_sum,
)
from .oracle import (
    fd_directional,
    grid_minimize,
    verify_curvature,
    verify_k_convexity,
    verify_variance_inequality,
)
from .resolvent import check_estimate_lower, check_estimate_upper, prox_upper, step_lower
from .schedules import StepSchedule, constant, harmonic, power, rate_envelope
from .spaces import (
    GeodesicBall,
    Point,
    SpaceDescriptor,
    TangentVector,
    comparison_distance,
    distance,
    euclidean,
    exp_map,
    geodesic_point,
    grad_exp,
    hyperbolic,
    inner_product,
    log_map,
    sphere,
    spider,
)

__version__ = "0.1.0"

__all__ = [
    "AlexflowError",
    "ConvergenceFailure",
    "FunctionalSpec",
    "GeodesicBall",
    "InvalidArgument",
    "MeasureSpec",
    "NonUniqueGeodesic",
    "OutOfRegionWarning",
    "Point",
    "RunRecord",
    "SpaceDescriptor",
    "StepSchedule",
    "TangentVector",
    "UnsupportedSpace",
    "affine",
    "check_estimate_lower",
    "check_estimate_upper",
    "comparison_distance",
    "constant",
    "cyclic_ppa",
    "directional_derivative",
    "distance",
    "distance_power",
    "envelope_kconvex",
    "euclidean",
    "evaluate",
    "exp_map",
    "expectation_and_variance",
    "fd_directional",
    "geodesic_point",
    "grad_exp",
    "gradient_of_minus_f",
    "grid_minimize",
    "harmonic",
    "hyperbolic",
    "inductive_mean",
    "inner_product",
    "jensen_run",
    "log_map",
    "power",
    "ppa",
    "prox_upper",
    "rate_envelope",
    "sphere",
    "spider",
    "squared_distance",
    "step_lower",
    "stochastic_ppa",
    "verify_curvature",
    "verify_k_convexity",
    "verify_variance_inequality",
    "weighted_sum",
]
