"""Exception hierarchy for the planner.

Every pipeline failure carries the stage it happened in so callers can
attribute errors to exactly one step.
"""


class PlanningError(Exception):
    """Base class for all planner failures."""

    stage = "unknown"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class SceneError(PlanningError):
    stage = "scene"


class NoIntersectionError(PlanningError):
    """Three-sphere intersection does not exist (unreachable joint vector)."""

    stage = "kinematics"


class UnreachableError(PlanningError):
    """Inverse kinematics target outside the reachable set."""

    stage = "kinematics"


class DegenerateHullError(PlanningError):
    stage = "workspace"


class EmptyIntersectionError(PlanningError):
    stage = "workspace"


class NoPathError(PlanningError):
    stage = "path_search"


class StartOccupiedError(PlanningError):
    stage = "path_search"


class GoalOccupiedError(PlanningError):
    stage = "path_search"


class CorridorGapError(PlanningError):
    stage = "corridor"


class OutOfDomainError(PlanningError):
    stage = "trajectory"


class SingularSystemError(PlanningError):
    stage = "trajectory"


class QpInfeasibleError(PlanningError):
    stage = "qp"


class MaxIterationsError(PlanningError):
    stage = "qp"


class NumericalFailureError(PlanningError):
    stage = "qp"


class NegativeWindowError(PlanningError):
    stage = "ee_planning"


class SingularAttitudeError(PlanningError):
    """Free-fall or gimbal-degenerate acceleration input."""

    stage = "ee_planning"


class NoConvergenceError(PlanningError):
    stage = "ee_planning"


class VerificationError(PlanningError):
    stage = "verification"
