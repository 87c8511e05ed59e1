"""Exception types raised across the package."""


class TrapcheckError(Exception):
    """Base class for all package errors."""


class InputError(TrapcheckError, ValueError):
    """Malformed or out-of-range input."""


class DomainError(TrapcheckError, ValueError):
    """Evaluation point outside the region where a quantity is defined."""


class NoHorizonError(TrapcheckError, ValueError):
    """Parameters violate nondegeneracy, so the horizons do not exist."""


class ConfigError(InputError):
    """Run configuration could not be parsed or validated."""
