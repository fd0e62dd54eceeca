"""Exception types raised across the package."""


class ReachError(Exception):
    """Base class for all errors raised by nnreach."""


class NetworkFormatError(ReachError, ValueError):
    """A network file could not be parsed into a valid Network."""


class DimensionMismatchError(NetworkFormatError):
    def __init__(self, layer_index, message):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")


class NonFiniteError(NetworkFormatError):
    pass


class UnsupportedDimensionError(ReachError, ValueError):
    """The requested algorithm does not support this input dimension."""


class UndefinedErrorMetric(ReachError, ArithmeticError):
    """The true set has zero area, so percent extra area is undefined."""


class FitError(ReachError, RuntimeError):
    """Arm-network fitting did not reach its residual tolerance."""
