"""Exception types shared across the package."""


class IbrLyapError(Exception):
    """Base class for all package errors."""


class DomainError(IbrLyapError, ValueError):
    """An input lies outside the domain of a function (e.g. non-finite state)."""


class ConfigError(IbrLyapError, ValueError):
    """Invalid parameters or run configuration."""


class NumericError(IbrLyapError, RuntimeError):
    """A numerical procedure failed to converge or produced non-finite output."""


class EquilibriumLost(IbrLyapError, RuntimeError):
    """The requested equilibrium does not exist for the given parameters."""
