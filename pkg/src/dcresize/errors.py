"""Exception hierarchy shared by every module."""


class DcrError(Exception):
    """Base class for all package errors."""


class ValidationError(DcrError, ValueError):
    """Invalid input parameters or malformed data."""


class TraceNotFoundError(DcrError, FileNotFoundError):
    pass


class TraceFormatError(ValidationError):
    """A trace file row could not be parsed."""


class NegativeRateError(TraceFormatError):
    pass


class EmptyTraceError(TraceFormatError):
    pass


class InfeasibleParameterError(ValidationError):
    """Parameters are individually valid but jointly unsatisfiable."""


class ConvergenceError(DcrError, RuntimeError):
    """A root finder failed to bracket or converge below its search cap."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
