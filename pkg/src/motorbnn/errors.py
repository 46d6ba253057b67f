"""Exception hierarchy shared across the pipeline."""


class MotorBNNError(Exception):
    """Base class for all package errors."""


class WavFormatError(MotorBNNError):
    """Malformed RIFF/WAVE structure."""

    def __init__(self, chunk: str, message: str):
        self.chunk = chunk
        super().__init__(f"malformed {chunk!r} chunk: {message}")


class UnsupportedFormatError(MotorBNNError):
    pass


class EmptySignalError(MotorBNNError):
    pass


class EmptyBandError(MotorBNNError):
    pass


class ShapeError(MotorBNNError, ValueError):
    pass


class DivergenceError(MotorBNNError):
    """Raised when optimisation or sampling produces non-finite values."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message)


class SamplerInitError(MotorBNNError):
    pass


class ConfigError(MotorBNNError, ValueError):
    pass


class TrialError(MotorBNNError):
    def __init__(self, trial: int, cause: Exception):
        self.trial = trial
        self.cause = cause
        super().__init__(f"trial {trial} failed: {cause}")
