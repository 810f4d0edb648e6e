"""Exception hierarchy shared by every sbscv_lab module."""


class SbscvError(Exception):
    """Base class for all errors raised by sbscv_lab."""


class InvalidInputError(SbscvError, ValueError):
    """Non-finite, mis-shaped, non-Hermitian or otherwise invalid numeric input."""


class PreconditionError(InvalidInputError):
    """An operation was called outside its documented preconditions."""


class EmptyBranchError(InvalidInputError):
    """A partition cell carries (numerically) no probability."""


class ConfigurationError(SbscvError, ValueError):
    """Scenario or environment configuration cannot be turned into a runnable setup."""


class ResourceError(SbscvError):
    """A requested matrix would exceed the configured dimension cap."""


class RankStarvationError(ResourceError):
    """Environment dimension too small to give every cell its own projector."""


class TruncationError(SbscvError):
    """A truncated oscillator is not converged on the sampled argument range."""


class DegenerateCandidateError(SbscvError):
    """The SBS candidate normalization collapsed below threshold."""
