"""Exception hierarchy.

Every error raised by the package derives from :class:`RestrictedLikelihoodError`.
The ``exit_code`` attribute is what the command line maps the error to.
"""


class RestrictedLikelihoodError(Exception):
    exit_code = 3


class ConfigError(RestrictedLikelihoodError, ValueError):
    """Invalid run configuration or invalid user input."""

    exit_code = 2


class DataError(RestrictedLikelihoodError, ValueError):
    """A data file could not be read into a valid dataset."""

    exit_code = 4


class NumericalError(RestrictedLikelihoodError, ArithmeticError):
    exit_code = 3


# geometry
class RankDeficient(ConfigError):
    pass


class TooFewRows(ConfigError):
    pass


class DegenerateDraw(NumericalError):
    pass


class DegenerateTangent(NumericalError):
    pass


class LinearlyDependent(NumericalError):
    pass


# estimators
class NoBracket(ConfigError):
    pass


class NoConvergence(NumericalError):
    pass


class ZeroScale(NumericalError):
    pass


class SingularImplicitSystem(NumericalError):
    pass


# sampler
class PostConditionViolated(NumericalError):
    pass


class DegenerateProjection(NumericalError):
    pass


class NearTangentDegeneracy(NumericalError):
    pass


class NumericalPDError(NumericalError):
    pass


class ImproperPosterior(ConfigError):
    pass


class ChainStalled(NumericalError):
    pass


# evaluation
class TooFewDraws(ConfigError):
    pass


class QuadratureFailure(NumericalError):
    pass


class EmptyAfterTrim(ConfigError):
    pass


class StratumTooSmall(ConfigError):
    pass


# io
class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} (at {', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumn(DataError):
    pass


class NonFiniteValue(ParseError):
    pass


class ChecksumMismatch(DataError):
    pass


class IoError(DataError, OSError):
    """A file could not be read or written."""
