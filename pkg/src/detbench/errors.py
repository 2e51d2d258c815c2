"""Shared exception types."""


class DetbenchError(Exception):
    """Base class for all detbench failures."""


class ParseError(DetbenchError):
    """Input text is not parseable; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class SchemaError(DetbenchError):
    """A required field is missing or has an unexpected type or shape."""


class IntegrityError(DetbenchError):
    """Cross-record references or checksums do not resolve."""

    def __init__(self, message: str, offending_ids: tuple = ()):
        if offending_ids:
            message = f"{message}: {sorted(offending_ids)}"
        super().__init__(message)
        self.offending_ids = tuple(offending_ids)


class ProtocolError(DetbenchError):
    """Request violates the train/val/test rotation protocol."""


class InfeasiblePlanError(DetbenchError):
    """No fold plan can satisfy the request on this dataset."""


class UndefinedMetricError(DetbenchError):
    """The metric has no defined value for the given inputs."""
