"""Exception hierarchy.

Every error carries a short ``kind`` tag; the command line prints it as the
machine-parsable prefix of its diagnostic line.
"""


class FdnFitError(Exception):
    kind = "error"


class ConfigurationError(FdnFitError, ValueError):
    kind = "config"


class RangeError(FdnFitError, IndexError):
    kind = "range"


class DegenerateInputError(FdnFitError, ValueError):
    kind = "degenerate"


class NotMeasurableError(FdnFitError, ValueError):
    kind = "not-measurable"


class DomainError(FdnFitError, ValueError):
    kind = "domain"


class NumericRangeError(FdnFitError, OverflowError):
    kind = "numeric-range"


class InputOutputError(FdnFitError, OSError):
    kind = "io"
