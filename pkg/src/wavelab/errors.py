"""Exception types raised across the package."""


class WavelabError(Exception):
    """Base class for all package errors."""


class RejectedInputError(WavelabError, ValueError):
    """An argument violates an operation's preconditions."""


class UnsupportedConfigurationError(WavelabError, ValueError):
    """A requested option (e.g. QAM order) is not implemented."""


class ConfigurationError(WavelabError, ValueError):
    """Inconsistent configuration, e.g. a compressed scheme without a transform."""


class FramingError(RejectedInputError):
    """Sample stream does not align with the expected block structure."""


class TrainingFailureError(WavelabError, RuntimeError):
    def __init__(self, message, loss_curve=()):
        super().__init__(message)
        self.loss_curve = list(loss_curve)


class EqualizationSingularityError(WavelabError, ArithmeticError):
    """Raised when a channel gain is too close to zero to invert.

    ``output`` holds the equalized vector with the singular bins zeroed and
    ``erased`` the boolean mask of those bins, so callers can keep going.
    """

    def __init__(self, message, output=None, erased=None):
        super().__init__(message)
        self.output = output
        self.erased = erased


class EstimationSingularityError(WavelabError, ArithmeticError):
    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = list(bins)


class IllConditionedPilotError(WavelabError, ArithmeticError):
    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


class SyncFailureError(WavelabError, RuntimeError):
    def __init__(self, message, peak_metric):
        super().__init__(message)
        self.peak_metric = peak_metric


class FrameCapacityError(WavelabError, ValueError):
    def __init__(self, required, available):
        super().__init__(
            f"payload needs {required} samples but the frame has {available} available"
        )
        self.required = required
        self.available = available
