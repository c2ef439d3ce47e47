"""Exception types shared across the package."""


class MakeupError(Exception):
    """Base class for all package errors."""


class ParameterError(MakeupError, ValueError):
    """An argument is outside its documented domain."""


class ShapeMismatchError(MakeupError, ValueError):
    """Array shapes that must agree do not."""


class NumericError(MakeupError, ArithmeticError):
    """A numerically invalid state (negative radicand, non-finite values)."""


class EmptyRegionError(MakeupError, ValueError):
    """An operation needs a non-empty masked region."""


class RegistrationError(MakeupError, RuntimeError):
    """Mask alignment failed or would violate the invertibility proxy."""


class BackendError(MakeupError, RuntimeError):
    """A backend call failed."""


class RemoteError(BackendError):
    """Transport-level failure talking to a remote denoiser."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class CompositionUnsupportedError(BackendError):
    """Backend has no attention hooks but a composition config was given."""


class ConfigError(MakeupError, ValueError):
    """A config document or mapping file is invalid."""


class StageError(MakeupError, RuntimeError):
    """Pipeline stage failure, annotated with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class JobCancelled(MakeupError):
    """Job was cancelled by the caller."""
