"""Exception types raised across the package."""


class CoreDNError(Exception):
    """Base class for all errors raised by coredn."""


class ZeroRankError(CoreDNError):
    """The matrix has numerical rank zero, so leverage scores are undefined."""


class SpectralNormError(CoreDNError):
    """Power iteration did not converge within the iteration cap."""

    def __init__(self, message, best_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate


class EmptyDrawError(CoreDNError):
    """A Bernoulli sampling draw selected no rows."""


class DataError(CoreDNError):
    """Input data violates a precondition (shape, finiteness, count validity)."""


class CSVParseError(DataError):
    """A CSV cell or row could not be parsed; carries its 1-based position."""

    def __init__(self, message, row=None, col=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"col {col}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.row = row
        self.col = col


class TrainingError(CoreDNError):
    """Fitting the conditional model of one variable failed."""

    def __init__(self, message, variable=None):
        if variable is not None:
            message = f"variable {variable}: {message}"
        super().__init__(message)
        self.variable = variable
