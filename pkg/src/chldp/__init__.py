"""Finite-difference stochastic Cahn-Hilliard: simulation and one-point rate functions."""

__version__ = "0.1.0"

from .model import Coefficients, linear_coefficients, make_coefficients, validate_assumptions
from .discrete_space import SpatialGrid, SpectralBasis
from .skeleton import Control, SpaceTimePath, skeleton_forward, skeleton_inverse
from .rate import RateResult, minimize_rate

__all__ = [
    "Coefficients", "linear_coefficients", "make_coefficients", "validate_assumptions",
    "SpatialGrid", "SpectralBasis", "Control", "SpaceTimePath", "skeleton_forward",
    "skeleton_inverse", "RateResult", "minimize_rate", "__version__",
]
