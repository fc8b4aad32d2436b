"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
anything else -> 4.
"""


class FairdepError(Exception):
    """Base class for all package errors."""


class ConfigError(FairdepError, ValueError):
    """Invalid configuration, argument, or undefined operation."""


class DataError(FairdepError, ValueError):
    """Malformed, missing, or insufficient input data."""


class ContractError(FairdepError, RuntimeError):
    """Shape or interface contract violated between pipeline stages."""
