"""Sigma-point and Bayes-Sard quadrature moment transforms and Kalman filters."""
from ._accel import USE_NUMBA
from .filtering import FilterResult, FilterState, StateSpaceModel, predict, run_filter, update
from .kernels import RbfParams
from .metrics import bootstrap_spread, inc, rmse, skl
from .polybasis import MultiIndexBasis, gh_max_degree_basis, ut_basis
from .quadrature import UnitSigmaPointSet, gh_points, gh_points_1d, spherical_radial_points, ut_points
from .transforms import (
    GaussianMoments,
    TransformWeights,
    apply_transform,
    bsq_integral_variance,
    bsq_weights,
    bsq_weights_agnostic,
    classical_weights,
)

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "FilterResult",
    "FilterState",
    "StateSpaceModel",
    "predict",
    "run_filter",
    "update",
    "RbfParams",
    "bootstrap_spread",
    "inc",
    "rmse",
    "skl",
    "MultiIndexBasis",
    "gh_max_degree_basis",
    "ut_basis",
    "UnitSigmaPointSet",
    "gh_points",
    "gh_points_1d",
    "spherical_radial_points",
    "ut_points",
    "GaussianMoments",
    "TransformWeights",
    "apply_transform",
    "bsq_integral_variance",
    "bsq_weights",
    "bsq_weights_agnostic",
    "classical_weights",
]
