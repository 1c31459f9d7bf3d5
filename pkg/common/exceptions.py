class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class InvalidArgumentError(LabError, ValueError):
    pass


class BasisTooLargeError(InvalidArgumentError):
    pass


class DimensionMismatchError(InvalidArgumentError):
    pass


class CutoffError(InvalidArgumentError):
    """A request (k, amplitude, moment order) does not fit under the particle cutoff."""


class KernelError(InvalidArgumentError):
    pass


class NotHermitianError(InvalidArgumentError):
    pass


class IntegerOverflowError(LabError, OverflowError):
    pass


class TailCertificateError(LabError):
    def __init__(self, message, tail=None, threshold=None):
        super().__init__(message)
        self.tail = tail
        self.threshold = threshold


class ProposalError(LabError):
    """Importance-sampling proposal is degenerate."""
