"""Exception hierarchy shared across the package.

Every error raised by library code derives from LineRankError so callers
can catch one type. The CLI maps each subclass to a distinct exit code.
"""


class LineRankError(Exception):
    """Base class for all errors raised by this package."""


class CaseFormatError(LineRankError):
    """A case file could not be parsed or failed structural validation."""


class NetworkError(LineRankError):
    """The network is unusable: disconnected graph, zero reactance, bad ids."""


class DataError(LineRankError):
    """Sample data is malformed: wrong shape, NaN scores, bad column names."""


class NumericError(LineRankError):
    """A numeric routine failed: LP did not converge, route disagreement."""


class UsageError(LineRankError):
    """Command line or config values are unusable (empty algorithm list,
    out-of-range k/j, unknown tokens)."""
