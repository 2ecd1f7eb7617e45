class OpalgError(Exception):
    """Base class for all package errors."""


class TheorySyntaxError(OpalgError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class TheoryValidationError(OpalgError):
    pass


class InternalConsistencyError(OpalgError):
    """A construction produced something its governing theorem rules out."""


class MissingFieldError(OpalgError):
    pass


class DimensionCapError(OpalgError):
    pass


class ClosureCapError(OpalgError):
    pass


class DimensionMismatchError(OpalgError):
    pass


class NonSpanningError(OpalgError):
    pass


class NotInConeError(OpalgError):
    pass


class NonCancellativeError(OpalgError):
    pass


class PathologyError(OpalgError):
    """A sequential theory violates a requirement of the operation-algebra
    construction (noncontextuality, well-defined product)."""


class UnknownOutcomeError(OpalgError, KeyError):
    pass
