"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AnisoflowError(Exception):
    """Base class for every error raised by the package."""


class DomainError(AnisoflowError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedError(AnisoflowError, ValueError):
    """A parameter value is outside what the implementation supports."""


class QuadratureError(AnisoflowError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class HypothesisError(AnisoflowError):
    """A structural hypothesis on the viscosity tensor is violated."""

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"{hypothesis}: {message}")
        self.hypothesis = hypothesis
        self.message = message


class CoercivityError(HypothesisError):
    """mu - eps_lower <= 0: the anisotropic part destroys coercivity."""

    def __init__(self, message: str):
        super().__init__("H2", message)


class RegularizationError(AnisoflowError):
    """Cap-and-shift regularization of the initial density failed."""


class SolverFailure(AnisoflowError):
    """Base for failures that end a time integration."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:.6g})")
        self.t = t
        self.message = message


class PositivityError(SolverFailure):
    """Density dropped below the configured floor."""


class BlowUpError(SolverFailure):
    """Non-finite values appeared in the state."""


class CadenceError(AnisoflowError):
    """Too few diagnostic samples for a time-integrated quantity."""


class ConfigError(AnisoflowError):
    """Invalid or unparseable run configuration."""
