class FallingBallsError(Exception):
    pass


class SimulationError(FallingBallsError):
    """A trajectory had to be aborted. ``partial`` holds what was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoEvent(SimulationError):
    pass


class Singularity(SimulationError):
    """Two collisions closer in time than the simultaneity tolerance."""


class GrazingSingularity(SimulationError):
    pass


class OrderViolation(SimulationError):
    pass


class AccumulationSuspected(SimulationError):
    pass


class DegenerateFrame(SimulationError):
    pass


class DomainError(FallingBallsError, ValueError):
    pass


class ReductionError(FallingBallsError, ValueError):
    """Tangent vector off the energy surface (sum of dh not zero)."""


class PreconditionViolated(FallingBallsError):
    pass


class SequenceChanged(FallingBallsError):
    pass


class OrbitNotFound(FallingBallsError):
    pass


class BudgetExceeded(FallingBallsError):
    pass
