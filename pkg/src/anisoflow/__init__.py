"""Pseudo-spectral compressible flow with anisotropic viscosity and a priori diagnostics."""

from .config import RunConfig
from .errors import (
    AnisoflowError,
    ConfigError,
    DomainError,
    HypothesisError,
    SolverFailure,
)
from .scalar_laws import PressureLaw
from .spectral import SpectralGrid, get_grid
from .tensor4 import ViscosityTensor, check_hypotheses, coercivity_bounds

__version__ = "0.1.0"

__all__ = [
    "AnisoflowError",
    "ConfigError",
    "DomainError",
    "HypothesisError",
    "PressureLaw",
    "RunConfig",
    "SolverFailure",
    "SpectralGrid",
    "ViscosityTensor",
    "check_hypotheses",
    "coercivity_bounds",
    "get_grid",
]
