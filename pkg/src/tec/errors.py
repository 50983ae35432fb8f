"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class TecError(Exception):
    exit_code = 1


class ShapeError(TecError, ValueError):
    """Mismatched mode dimensions, ranks or vector lengths."""

    exit_code = 3


class DataError(TecError, ValueError):
    """Unusable input data: bad labels, empty sets, corrupt archives."""

    exit_code = 3


class CapacityError(TecError, MemoryError):
    """A dense buffer would exceed the configured size limit."""

    exit_code = 3


class SolverError(TecError, ArithmeticError):
    """Numerical failure inside the STM solver."""

    exit_code = 4

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
