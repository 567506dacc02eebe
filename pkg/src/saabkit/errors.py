"""Exception and warning types raised across saabkit."""


class SaabkitError(Exception):
    """Base class for every error raised by this package."""


class RejectedInputError(SaabkitError, ValueError):
    """Input has the wrong shape, wrong size or non-finite values."""


class EmptyAccumulatorError(SaabkitError, ValueError):
    pass


class UnderdeterminedError(SaabkitError, ValueError):
    """Too few samples to estimate a covariance of the requested size."""


class InsufficientDataError(SaabkitError, ValueError):
    pass


class DegenerateDataError(SaabkitError, ValueError):
    pass


class InvalidStrategyError(SaabkitError, ValueError):
    pass


class OutOfBorderError(SaabkitError, IndexError):
    """Intra prediction references fall outside the plane."""


class FrameRangeError(SaabkitError, IndexError):
    pass


class ParseError(SaabkitError, ValueError):
    """Malformed image or container file.

    ``offset`` is the byte position where parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class KernelFileError(SaabkitError, ValueError):
    pass


class KernelVersionError(KernelFileError):
    pass


class KernelDimensionError(KernelFileError):
    pass


class KernelOrthonormalityError(KernelFileError):
    pass


class DegenerateACWarning(UserWarning):
    """Training data does not span the full AC subspace."""
