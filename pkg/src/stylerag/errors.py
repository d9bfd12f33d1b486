"""Exception hierarchy.

Every error carries a stable ``code`` string so the CLI and the HTTP service
can report failures in a structured way.
"""

from __future__ import annotations


class StyleRagError(Exception):
    code = "StyleRagError"


class DimensionMismatch(StyleRagError, ValueError):
    code = "DimensionMismatch"


class NonFiniteInput(StyleRagError, ValueError):
    code = "NonFiniteInput"


class PositionOutOfRange(StyleRagError, IndexError):
    code = "PositionOutOfRange"


class EndpointUnavailable(StyleRagError, ConnectionError):
    code = "EndpointUnavailable"


class EmptyInput(StyleRagError, ValueError):
    code = "EmptyInput"


class DuplicateClipId(StyleRagError, ValueError):
    code = "DuplicateClipId"


class UnknownClipId(StyleRagError, KeyError):
    code = "UnknownClipId"

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class TooManyClusters(StyleRagError, ValueError):
    code = "TooManyClusters"


class UnsupportedVersion(StyleRagError, ValueError):
    code = "UnsupportedVersion"


class CorruptFile(StyleRagError, ValueError):
    code = "CorruptFile"


class UnorderedInput(StyleRagError, ValueError):
    code = "UnorderedInput"


class OverlappingSegments(StyleRagError, ValueError):
    code = "OverlappingSegments"


class EmptyTranscript(StyleRagError, ValueError):
    code = "EmptyTranscript"


class EmptyDatabase(StyleRagError, LookupError):
    code = "EmptyDatabase"


class EmptyBundle(StyleRagError, LookupError):
    code = "EmptyBundle"


class EmptyText(StyleRagError, ValueError):
    code = "EmptyText"


class ModeMismatch(StyleRagError, ValueError):
    code = "ModeMismatch"


class InvalidQuery(StyleRagError, ValueError):
    code = "InvalidQuery"
