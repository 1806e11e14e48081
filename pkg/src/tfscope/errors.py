"""Exception types shared across the toolkit.

Contract violations on in-memory arguments (bad ``k``, width mismatches,
out-of-range parameters) raise plain ``ValueError``; these classes cover
failures rooted in the *data* itself or in files on disk, so callers such
as the CLI can map them to a distinct exit status.
"""


class TfscopeError(Exception):
    """Base class for data-dependent failures."""


class DataFormatError(TfscopeError):
    """A cube header/payload pair is missing, malformed, or inconsistent."""


class DegenerateDataError(TfscopeError):
    """The data violates a numerical precondition.

    Examples: a zero-variance variable under z-scoring, linearly dependent
    endmember signatures, perplexity calibration that cannot converge.
    """
