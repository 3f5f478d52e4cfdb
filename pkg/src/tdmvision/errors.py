"""Exception types shared across the package."""

from __future__ import annotations


class TdmError(Exception):
    """Base class for every error raised by tdmvision."""


class ValidationError(TdmError, ValueError):
    """Input violates a documented invariant."""


class ManifestParseError(ValidationError):
    """Manifest text is not valid JSON."""

    def __init__(self, message: str, line: int, column: int, offset: int) -> None:
        super().__init__(f"{message} (line {line}, column {column}, offset {offset})")
        self.line = line
        self.column = column
        self.offset = offset


class RasterFormatError(TdmError):
    """A PGM/PPM file is truncated or malformed."""

    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class PipelineError(TdmError):
    """A pipeline stage failed; carries the stage name and frame id."""

    def __init__(self, stage: str, frame_id: int | None, cause: BaseException | None = None,
                 message: str | None = None) -> None:
        where = f"frame {frame_id}" if frame_id is not None else "no frame"
        detail = message or (f"{type(cause).__name__}: {cause}" if cause else "failed")
        super().__init__(f"stage '{stage}' failed at {where}: {detail}")
        self.stage = stage
        self.frame_id = frame_id
        self.cause = cause
        self.partial: list = []
