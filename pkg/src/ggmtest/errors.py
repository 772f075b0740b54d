"""Exception types shared across the package.

Numeric routines raise :class:`DomainError` for arguments outside their
mathematical domain, so callers can distinguish bad inputs from genuine
numerical failure.  Data-loading problems get their own hierarchy under
:class:`ParseError` so the command line layer can map them to exit codes.
"""


class GgmTestError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GgmTestError, ValueError):
    """An argument lies outside the mathematical domain of a routine."""


class NotPositiveDefinite(GgmTestError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class SingularCovariance(NotPositiveDefinite):
    """A sample covariance matrix is singular or numerically indefinite.

    Typically the sample size is too small relative to the dimension, or
    columns are linearly dependent.
    """


class DegenerateCorrection(GgmTestError, ArithmeticError):
    """The finite-sample scaling correction is undefined for these sizes."""


class ParseError(GgmTestError, ValueError):
    """Input text could not be parsed."""


class SchemaMismatch(ParseError):
    """Parsed input disagrees with the expected column layout."""


class TooFewRows(ParseError):
    """A dataset has fewer observations than the minimum required."""


class ConfigError(ParseError):
    """A configuration file is malformed or inconsistent."""
