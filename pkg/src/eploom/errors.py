"""Exception types raised by eploom."""


class EploomError(Exception):
    """Base class for all library errors."""


class CoalescentEigensystem(EploomError):
    """Left/right eigenvectors are unusable because the point is (numerically) an EP."""


class AmbiguousContinuation(EploomError):
    """Both labelings of a candidate eigensystem are equally close to the previous one."""


class StepSizeUnderflow(EploomError):
    """The adaptive integrator could not satisfy the tolerances."""


class CalibrationFailed(EploomError):
    """No candidate angular speed satisfied the calibration gates."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class LoopThroughEP(EploomError):
    """The loop passes through an exceptional point, so its winding is undefined."""


class RefinementCapExceeded(EploomError):
    """Sample doubling hit its cap before the winding number converged."""


class RadicandHitsOrigin(EploomError):
    """The splitting radicand touches zero somewhere on the loop."""


class GridMismatch(EploomError):
    """Two maps were computed on different grids."""


class NoComparableCells(EploomError):
    """A map comparison found no cells flagged ok in both inputs."""


class Cancelled(EploomError):
    """A sweep was stopped through its cancellation event."""
