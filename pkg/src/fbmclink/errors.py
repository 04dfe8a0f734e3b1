"""Exception taxonomy shared across the package.

ConfigError maps to CLI exit code 2, NumericalError (and subclasses) to 3.
"""


class ConfigError(ValueError):
    """Bad user-supplied configuration: unknown key, constraint violation."""


class NumericalError(ArithmeticError):
    """Numerical failure while computing (e.g. singular channel)."""


class SingularChannelError(NumericalError):
    """Rank-deficient channel matrix at some design frequency."""
