"""Exception types shared across the package."""


class GfmError(Exception):
    """Base class for all package errors."""


class ConfigError(GfmError, ValueError):
    """Invalid scenario, parameter block or network description."""


class NetworkError(ConfigError):
    """Structurally invalid network (unknown bus, isolated island, zero impedance)."""


class ConvergenceError(GfmError, RuntimeError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NumericalError(GfmError, RuntimeError):
    """Singular matrix or non-finite state during a computation."""
