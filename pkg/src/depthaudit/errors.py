"""Exception hierarchy shared by all depthaudit modules."""

from __future__ import annotations


class DepthAuditError(Exception):
    """Base class for every error raised by depthaudit."""


class DegenerateProjection(DepthAuditError, ValueError):
    """Point lies on or behind the camera plane."""


class InvalidDepthSample(DepthAuditError, ValueError):
    """A depth lookup touched an invalid (NaN) pixel."""


class AspectMismatch(DepthAuditError, ValueError):
    pass


class DimensionError(DepthAuditError, ValueError):
    pass


class InsufficientPoints(DepthAuditError, ValueError):
    pass


class DomainError(DepthAuditError, ValueError):
    pass


class MetadataError(DepthAuditError, ValueError):
    """Base for metadata parsing problems; ``field`` names the offending key."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class MissingField(MetadataError):
    pass


class BadType(MetadataError):
    pass


class InvariantViolation(MetadataError):
    pass


class EmptyReport(DepthAuditError, ValueError):
    pass


class DegenerateConfiguration(DepthAuditError, ValueError):
    pass


class NumericalFailure(DepthAuditError, ArithmeticError):
    pass


class NoConvergence(DepthAuditError, RuntimeError):
    pass


class NoUsableViews(DepthAuditError, ValueError):
    pass


class NoValidSamples(DepthAuditError, ValueError):
    pass


class DegenerateScene(DepthAuditError, ValueError):
    pass


class IllConditioned(UserWarning):
    """Warning category: normal equations are badly conditioned."""
