"""Exception types raised by the extraction pipeline."""


class ExtractorError(Exception):
    """Base class for every extraction failure."""


class BadExtractionSpec(ExtractorError):
    """A spec field is missing, malformed, or inconsistent."""


class ModelUnavailable(ExtractorError):
    """A requested model cannot be built with the available backends."""


class DatasetUnavailable(ExtractorError):
    """The requested dataset cannot be loaded or does not cover the request."""


class DimensionMismatch(ExtractorError):
    """A model emitted features of a different width than registered."""


class NonFiniteFeatures(ExtractorError):
    """A model emitted NaN or infinite feature values."""
