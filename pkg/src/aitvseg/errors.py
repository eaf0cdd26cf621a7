"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class AitvSegError(Exception):
    exit_code = 1


class ParameterError(AitvSegError, ValueError):
    """A scalar parameter lies outside its admissible domain."""

    exit_code = 2


class DimensionError(AitvSegError, ValueError):
    """Array shapes do not agree."""

    exit_code = 3


class DataError(AitvSegError, ValueError):
    """Input data violates a precondition (negative counts, all-zero image, ...)."""

    exit_code = 3


class DomainError(DataError):
    """A function was evaluated outside its domain, e.g. log of a nonpositive value."""


class InfeasibleError(DataError):
    """The requested clustering cannot be realised on the given points."""


class NumericalError(AitvSegError, ArithmeticError):
    """Ill-posed solve or non-finite iterate."""

    exit_code = 4
