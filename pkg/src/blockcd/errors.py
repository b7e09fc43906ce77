"""Exception types shared across the library."""


class BlockCDError(Exception):
    """Base class for all blockcd errors."""


class InfeasibleIndicator(BlockCDError):
    """A hard indicator constraint (x >= 0 or -1 <= x <= 1) is violated."""


class DegenerateProjection(BlockCDError):
    """Projection target has no positive mass on the nonnegative sphere."""


class InfeasibleTarget(BlockCDError):
    """Box-hyperplane sum target is unreachable (|c| > n)."""


class AllZeroCoefficients(BlockCDError):
    """Root solving requested for the identically zero polynomial."""


class IdenticalIndices(BlockCDError):
    """A pairwise block solver was given i == j."""


class EmptyInterval(BlockCDError):
    """The feasible step interval is empty; the iterate is infeasible."""


class BlockTooLarge(BlockCDError):
    """Working set exceeds the enumeration guard (k > 20)."""


class KMismatch(BlockCDError):
    """Selection strategy does not support the requested block size."""


class TooLarge(BlockCDError):
    """Requested enumeration exceeds the combinatorial budget."""


class TooManyBlocks(BlockCDError):
    """Exhaustive probing requested over too many working sets."""


class InfeasibleStart(BlockCDError):
    """Solver started from a point outside the feasible set."""


class UnsupportedCombination(BlockCDError):
    """Solver/family combination is not available (e.g. BCD-l on non-SIT)."""


class MonotonicityBreach(BlockCDError):
    """A BCD step violated the sufficient-decrease guarantee."""


class CsvFormatError(BlockCDError):
    """Malformed CSV input (ragged rows, non-numeric cell, empty file)."""
