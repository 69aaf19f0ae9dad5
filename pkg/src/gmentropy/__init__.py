"""Gaussian-mixture entropy approximation, error bounds, and a
mixture-posterior variational trainer for small regression networks."""

from .mixture import (
    Covariance,
    GaussianComponent,
    GaussianMixture,
    NumericalError,
    UnsupportedConfiguration,
    log_density,
    mahalanobis_norm,
    mixture_from_json,
    mixture_to_json,
    op_norm_cross,
    sample,
)
from .entropy import (
    EntropyEstimate,
    entropy_bonilla,
    entropy_exact_k2,
    entropy_huber,
    entropy_mc,
    entropy_ours,
    entropy_reduced_mc,
)
from .bounds import (
    AlphaMatrix,
    BoundReport,
    DerivativeBoundReport,
    alpha_pair,
    alpha_set,
    c_coefficient,
    derivative_bounds,
    error_bounds_general,
    error_bounds_shared,
    probabilistic_bound_rhs,
)
from .quadrature import gauss_hermite

__version__ = "0.1.0"

__all__ = [
    "Covariance",
    "GaussianComponent",
    "GaussianMixture",
    "NumericalError",
    "UnsupportedConfiguration",
    "log_density",
    "mahalanobis_norm",
    "mixture_from_json",
    "mixture_to_json",
    "op_norm_cross",
    "sample",
    "EntropyEstimate",
    "entropy_bonilla",
    "entropy_exact_k2",
    "entropy_huber",
    "entropy_mc",
    "entropy_ours",
    "entropy_reduced_mc",
    "AlphaMatrix",
    "BoundReport",
    "DerivativeBoundReport",
    "alpha_pair",
    "alpha_set",
    "c_coefficient",
    "derivative_bounds",
    "error_bounds_general",
    "error_bounds_shared",
    "probabilistic_bound_rhs",
    "gauss_hermite",
]
