"""Exception hierarchy shared by all numerical layers."""

from typing import Optional


class LocalNOError(Exception):
    """Base class for errors raised by localno."""


class InvalidArgumentError(LocalNOError, ValueError):
    """Exception indicating an argument outside its admissible range."""


class UnsupportedTopologyError(LocalNOError):
    """Exception indicating an operation is undefined on the grid topology."""


class AssemblyDegenerateError(LocalNOError):
    """Exception indicating an output point without any input neighbour."""

    def __init__(self, row: int, message: Optional[str] = None):
        self.row = row
        super().__init__(message or f"Output point {row} has no input point within the cutoff.")


class NotEquivariantError(LocalNOError):
    """Exception indicating kernel rows are not translates of one another."""


class DegenerateNeighborhoodError(LocalNOError):
    """Exception indicating a neighbourhood does not affinely span the space."""

    def __init__(self, point: int, rank: int, required: int):
        self.point = point
        self.rank = rank
        self.required = required
        super().__init__(
            f"Neighbourhood of point {point} has rank {rank}, need {required}."
        )


class DegenerateTargetError(LocalNOError):
    """Exception indicating a target with zero norm."""


class DivergedError(LocalNOError):
    """Exception indicating non-finite losses or gradients."""

    def __init__(self, message: str, last_good: Optional[dict] = None, epoch: int = -1):
        self.last_good = last_good
        self.epoch = epoch
        super().__init__(message)


class IncompatibleDatasetError(LocalNOError):
    """Exception indicating an unreadable or mismatched dataset file."""


class IncompatibleCheckpointError(LocalNOError):
    """Exception indicating an unreadable or mismatched checkpoint file."""
