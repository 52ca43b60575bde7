"""Exception hierarchy shared by all gaqq modules."""


class GAQQError(Exception):
    """Base class for every error raised by the package."""


class InvalidInput(GAQQError, ValueError):
    pass


class NotPositiveDefinite(GAQQError, ValueError):
    pass


class NotPositiveSemiDefinite(GAQQError, ValueError):
    pass


class TuningFailed(GAQQError, RuntimeError):
    """Every (lambda1, lambda2) pair of a tuning grid failed to fit.

    ``diagnostics`` maps each grid pair to the error message it produced.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BenchmarkFailed(GAQQError, RuntimeError):
    pass


class ParseError(GAQQError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(GAQQError, ValueError):
    pass


class UnsupportedVersion(SchemaError):
    pass
