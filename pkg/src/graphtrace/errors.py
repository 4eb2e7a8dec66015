"""Exception hierarchy.

The CLI maps each family to an exit code: usage problems exit 2, data and
format problems exit 3 and numerical failures exit 4.
"""


class GraphTraceError(Exception):
    """Base class for every error raised by this package."""


class DataError(GraphTraceError):
    """Malformed or inconsistent input data (exit code 3)."""


class NumericError(GraphTraceError, ArithmeticError):
    """A numerical routine failed (exit code 4)."""


class InvalidSizeError(DataError, ValueError):
    pass


class NoNeighborError(DataError, ValueError):
    pass


class NoEdgeError(DataError, ValueError):
    pass


class ShapeError(DataError, ValueError):
    pass


class ArgumentError(DataError, ValueError):
    pass


class PreconditionError(DataError, ValueError):
    pass


class MissingLayerError(DataError, LookupError):
    def __init__(self, layer, available):
        self.layer = layer
        self.available = sorted(available)
        super().__init__(f"layer {layer} not in dump; available layers: {self.available}")


class DumpFormatError(DataError):
    """Activation dump could not be decoded; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class FitError(DataError, ValueError):
    pass


class DomainError(DataError, ValueError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, iterations):
        self.iterations = iterations
        super().__init__(f"{message} after {iterations} iterations")


class CoverageTimeout(NumericError):
    pass
