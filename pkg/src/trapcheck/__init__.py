"""Numerical checks of trapping, subprincipal structure and ε-symmetrization
for linear waves on Schwarzschild–de Sitter black holes."""

from .errors import ConfigError, DomainError, InputError, NoHorizonError, TrapcheckError
from .sds_metric import SdsParams, horizons, metric_values, photon_sphere, validate_params

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InputError",
    "NoHorizonError",
    "TrapcheckError",
    "SdsParams",
    "horizons",
    "metric_values",
    "photon_sphere",
    "validate_params",
]
