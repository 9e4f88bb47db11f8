"""Exception types shared across the toolkit."""


class LichenmeterError(Exception):
    pass


class DetectionFailure(LichenmeterError):
    """Fewer than four usable calibration targets, or ambiguous ordering."""

    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found


class DegenerateGeometry(LichenmeterError):
    """Point correspondences do not determine an invertible homography."""


class ModelFailure(LichenmeterError):
    """A color model cannot be built (e.g. one class has no pixels)."""


class InvalidTrainingSet(LichenmeterError):
    """Training table unusable: single class, or too few rows per class."""


class SpecInfeasible(LichenmeterError):
    """A synthetic scene spec could not be satisfied (e.g. blob placement)."""
