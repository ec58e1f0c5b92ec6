"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` to exit status 1 and ``StructuralError``
(and its subclasses) to exit status 2.
"""


class HostelOpsError(Exception):
    """Base class for all package errors."""


class StructuralError(HostelOpsError):
    """Malformed input: bad node ids, empty instances, dimension mismatches."""


class ValidationError(HostelOpsError):
    """Well-formed input that violates a business rule."""


class TransitionError(ValidationError):
    """A state machine was asked to perform an illegal transition."""

    def __init__(self, current, requested, what: str = "state"):
        self.current = current
        self.requested = requested
        super().__init__(f"illegal {what} transition: {current} -> {requested}")


class FitError(ValidationError):
    """A model could not be fitted on the supplied data."""


class SpecError(ValidationError):
    """A workload specification is inconsistent."""


class ConfigError(ValidationError):
    """Unknown or malformed configuration entry."""
