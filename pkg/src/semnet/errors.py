"""Exception types shared across the library.

Everything raised on purpose derives from :class:`SemnetError`, so callers
can catch one base class at an orchestration boundary (see ``semnet.cli``).
"""


class SemnetError(Exception):
    """Base class for all errors raised by this library."""


class DimensionMismatch(SemnetError):
    """Matrix shapes are incompatible with the requested operation."""


class NonFiniteData(SemnetError):
    """An input matrix contains NaN or infinite entries."""


class SingularGramian(SemnetError):
    """The dictionary Gramian D^T D is singular where an inverse or
    log-determinant is required (degenerate dictionary iterate)."""


class BadBudget(SemnetError):
    """A row-support budget or edge budget is out of its valid range."""


class ZeroReference(SemnetError):
    """Normalized edge loss is undefined because the reference
    representation has zero Frobenius norm."""


class BadSpec(SemnetError):
    """A generator spec or config file is missing fields or inconsistent."""


class UnknownEdge(SemnetError):
    """An edge was queried that is not part of the sheaf."""


class FormatError(SemnetError):
    """An on-disk file has a bad magic number, version, or length."""


class ChecksumError(SemnetError):
    """An on-disk file does not match the checksum in its manifest."""


class ManifestMismatch(SemnetError):
    """Shapes declared by a bundle manifest disagree with its files."""
