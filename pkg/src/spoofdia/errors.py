"""Exception hierarchy shared by all spoofdia modules."""


class SpoofDiaError(Exception):
    """Base class for every toolkit error (maps to CLI exit code 1)."""


class InvalidAnnotation(SpoofDiaError):
    """Annotation data violates the segment/timeline contract."""


class GridMismatch(SpoofDiaError):
    """Two frame-aligned structures do not share the same frame grid."""


class EmptyReference(SpoofDiaError):
    """A reference timeline has no scored frames left to evaluate."""


class EmptyReport(SpoofDiaError):
    """Aggregation was asked to summarize zero file scores."""


class DegenerateEmbedding(SpoofDiaError):
    """An embedding row has zero norm; cosine distance is undefined."""


class DegenerateScores(SpoofDiaError):
    """Score data contains only one class; no error tradeoff exists."""


class MissingThreshold(SpoofDiaError):
    """Binary localization decisions were requested without a threshold."""


class TooFewFrames(SpoofDiaError):
    """Requested cluster count exceeds the number of frames."""


class FormatError(SpoofDiaError):
    """A data file does not conform to its declared on-disk format."""


class InvalidConfig(SpoofDiaError):
    """A configuration value is out of range or inconsistent."""


class IoError(SpoofDiaError):
    """A filesystem destination could not be read or written."""
