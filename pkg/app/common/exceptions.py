"""Domain errors raised by the merge tree toolkit.

Every error derives from MergeTreeError so callers (the CLI in particular) can
separate domain failures from programming errors with a single except clause.
"""


class MergeTreeError(Exception):
    """Base class for all domain errors."""


class ParseError(MergeTreeError, ValueError):
    """An input file could not be parsed into the expected structure."""


class DimensionMismatch(MergeTreeError, ValueError):
    """The number of values does not match the grid extents."""


class NonFiniteValue(MergeTreeError, ValueError):
    """A scalar value is NaN or infinite."""


class InvalidParameter(MergeTreeError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class NestingViolation(MergeTreeError, ValueError):
    """A child branch interval is not contained in its parent interval."""


class ZeroPersistenceParent(MergeTreeError, ValueError):
    """Local normalization was asked to divide by a zero-length parent interval."""


class NonConvergence(MergeTreeError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class EmptyTree(MergeTreeError, ValueError):
    """A tree without branches was given where one is required."""


class InvalidAlpha(MergeTreeError, ValueError):
    """An interpolation parameter lies outside [0, 1]."""


class MatchingMismatch(MergeTreeError, ValueError):
    """A matching references branches that do not exist in the given trees."""


class WeightError(MergeTreeError, ValueError):
    """Barycentric weights are negative or do not sum to one."""


class EmptyEnsemble(MergeTreeError, ValueError):
    """An ensemble operation received no members."""


class InvalidK(MergeTreeError, ValueError):
    """The requested number of clusters is not within [1, N]."""


class LengthMismatch(MergeTreeError, ValueError):
    """Two label sequences have different lengths."""


class InvalidKeyFrames(MergeTreeError, ValueError):
    """Key frames are unsorted, out of range or miss the sequence endpoints."""


class UsageError(MergeTreeError):
    """The command line could not be interpreted."""
