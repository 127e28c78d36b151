"""Free additive convolution, Brown measures of deformed single ring models and
their random matrix counterparts."""

__version__ = "0.1.0"

from .errors import BoundaryExtrapolationError, ConvergenceError, DomainError, QuadratureError
from .measures import AtomicMeasure, HalfPlanePoint, SymmetricMeasure, levy_distance, log_moment
from .subordination import ConvolvedMeasure, SolverSettings, boundary_omega, density_at, solve
from .brown import BrownField, GridSpec, OperatorModel, brown_field, classify, l2_data, log_potential

__all__ = [
    "AtomicMeasure",
    "SymmetricMeasure",
    "HalfPlanePoint",
    "levy_distance",
    "log_moment",
    "ConvolvedMeasure",
    "SolverSettings",
    "solve",
    "boundary_omega",
    "density_at",
    "OperatorModel",
    "GridSpec",
    "BrownField",
    "brown_field",
    "classify",
    "l2_data",
    "log_potential",
    "DomainError",
    "ConvergenceError",
    "QuadratureError",
    "BoundaryExtrapolationError",
]
