"""
Exception Types

All errors raised by covertraj derive from CoverTrajError so the CLI can map
them to the data-error exit code in one place.
"""


class CoverTrajError(Exception):
    """Base class for covertraj errors"""


class DataError(CoverTrajError, ValueError):
    """Input data violates a documented format or invariant"""


class InvalidState(DataError):
    """A value type was constructed with fields outside their domain"""


class LengthMismatch(DataError):
    """Two trajectories (or a trajectory and a config) disagree on N"""


class RateMismatch(DataError):
    """Two trajectories disagree on the sampling interval dt"""


class EmptySet(DataError):
    """A trajectory set with no modes was supplied"""


class EmptyCorpus(DataError):
    """A corpus with no trajectories was supplied"""


class TooLarge(DataError):
    """The exhaustive cover oracle was asked to search too many elements"""


class MissingSeedStates(DataError):
    """A corpus without per-sample initial states was given to a dynamic builder"""


class KOutOfRange(DataError):
    """Top-k selection requested with k outside [1, number of modes]"""


class EmptyRecords(DataError):
    """A hit rate was requested over zero instances"""


class DimensionMismatch(DataError):
    """Feature vector length does not match the model"""


class EmptyDataset(DataError):
    """Training was requested on an empty dataset"""


class InvalidRange(DataError):
    """A sampling range is empty or reversed"""


class InstanceError(CoverTrajError):
    """Wraps a per-instance failure during dataset evaluation"""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"instance {index}: {cause}")

    def __reduce__(self):
        return (InstanceError, (self.index, self.cause))
