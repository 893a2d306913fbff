"""Chance-constrained impulsive maneuver design with banana-shaped confidence contours.

Higher-order moments of a propagated Gaussian are computed by Gauss-Hermite
cubature and folded into a bent 2D confidence contour per position slice;
the contour points then act as deterministic surrogates for half-space
chance constraints inside an SQP solve.
"""

from .chance_opt import (
    HalfSpaceConstraint,
    Method,
    OptimizerSettings,
    SolveReport,
    TargetBox,
    box_constraints,
    evaluate_constraints,
    solve,
)
from .contour import (
    BananaContour,
    ConfidenceMode,
    ConfidenceSpec,
    bend_coefficient,
    build_contour,
    cf_shift,
    confidence_scale,
    sample_contour,
)
from .dynamics import PropagationSettings, propagate, propagate_many
from .errors import (
    BananaError,
    CollisionError,
    ContourError,
    MomentPropagationError,
    PropagationError,
    ScenarioError,
    SolveError,
)
from .moment_propagation import gauss_hermite_rule, linear_covariance, monte_carlo_moments, propagate_moments
from .scenario import ScenarioConfig, load_scenario
from .tensor_stats import MomentSet, SliceSpec, moments_from_points, slice_moments, whiten

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
