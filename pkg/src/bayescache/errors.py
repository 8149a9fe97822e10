"""Exception types shared across the package."""


class BayesCacheError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BayesCacheError):
    """Embedding dimension or class count differs from the session's."""


class MissingBox(BayesCacheError):
    """Detection-mode proposal arrived without a bounding box."""


class NotNormalized(BayesCacheError):
    """Feature norm deviates from 1 beyond the repairable window."""


class BadDistribution(BayesCacheError):
    """Probability vector has negative mass or does not sum to 1."""


class EmptyCache(BayesCacheError):
    """Operation requires at least one cache entry."""


class MissingScale(BayesCacheError):
    """Detection-mode cache entry lacks a stored spatial scale."""


class KMismatch(BayesCacheError):
    """Two distributions being fused cover different class counts."""


class MissingGroundTruth(BayesCacheError):
    """Metric requested over proposals without ground-truth annotations."""


class BadRange(BayesCacheError):
    """Segment range is not a valid sub-interval of [0, 1]."""


class BadShiftSpec(BayesCacheError):
    """Synthetic-shift settings are internally inconsistent."""


class SchemaError(BayesCacheError):
    """File content violates the record schema (line number in message)."""


class VersionMismatch(SchemaError):
    """File declares a format version this reader does not support."""


class IndexOutOfRange(BayesCacheError, IndexError):
    """Cache entry index outside [0, M)."""
