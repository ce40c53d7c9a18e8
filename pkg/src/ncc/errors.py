"""Exception hierarchy shared by all modules."""


class NccError(Exception):
    """Base class for toolkit errors."""


class InvalidDistributionError(NccError, ValueError):
    pass


class ParameterError(NccError, ValueError):
    pass


class TruncatedStreamError(NccError):
    """Bits ran out in the middle of a codeword."""


class StreamExhaustedError(NccError):
    """A stack coder was asked to pop from an empty stream."""


class InitialBitsExhaustedError(StreamExhaustedError):
    """Bits-back sampling needed more auxiliary bits than were supplied."""


class UnencodableError(NccError, ValueError):
    """The model assigns zero probability to the requested data."""


class ConvergenceError(NccError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FormatError(NccError):
    """Malformed container or header."""


class ChecksumError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class DivergenceError(ConvergenceError):
    """Training produced a non-finite loss; ``last_state`` holds the last finite parameters."""

    def __init__(self, message, last_state=None, residual=None):
        super().__init__(message, residual)
        self.last_state = last_state
