"""Exception types shared across the package.

ValidationError covers bad inputs and configuration (CLI exit code 1);
everything else raised by the library is treated as a runtime failure
(CLI exit code 2).
"""


class TetrapureError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(TetrapureError, ValueError):
    """Invalid input data, graph, or configuration."""


class UnknownLabelError(TetrapureError, KeyError):
    """A variable or node label is not present in the structure at hand."""


class GuardExceededError(TetrapureError):
    """A size guard tripped before an exponential enumeration started."""


class DegenerateDataError(TetrapureError, ValueError):
    """Input data cannot support the requested computation (e.g. a constant column)."""
