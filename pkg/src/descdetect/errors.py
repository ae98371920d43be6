"""Exception hierarchy. Every failure the package raises on bad input derives
from :class:`DescDetectError`, so callers (and the fuzz suite) can tell typed
failures apart from crashes."""


class DescDetectError(Exception):
    pass


class ParseError(DescDetectError):
    """Container parsing failed at a known byte offset."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class TruncatedBox(ParseError):
    pass


class MissingMoov(ParseError):
    pass


class MalformedVarint(ParseError):
    pass


class TruncatedElement(ParseError):
    pass


class InvalidRecord(ParseError):
    """Parsed values violate a DescriptorRecord invariant."""


class MalformedDocument(DescDetectError):
    pass


class MissingStreams(MalformedDocument):
    pass


class UnsupportedFormat(DescDetectError):
    pass


class EmptyTrainingSet(DescDetectError):
    pass


class DimensionMismatch(DescDetectError):
    pass


class SingleClassInput(DescDetectError):
    pass


class DegenerateStratum(DescDetectError):
    pass


class NoPositives(DescDetectError):
    pass


class SchemaVersionMismatch(DescDetectError):
    pass


class ConfigError(DescDetectError):
    pass


class NonConvergenceWarning(UserWarning):
    """SMO hit its iteration cap; the model is usable but flagged."""
