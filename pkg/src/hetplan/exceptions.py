"""Exception types shared across the package."""


class HetplanError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(HetplanError):
    """Layer input does not match the expected dimensions.

    Carries an explicit dimension report so callers can see what was
    expected versus what arrived.
    """

    def __init__(self, op, expected, got):
        self.op = op
        self.expected = expected
        self.got = got
        super().__init__(f"{op}: expected {expected}, got {got}")


class NotFittedError(HetplanError):
    """Estimator used before fit() (or before loading a checkpoint)."""


class NonFiniteGradientError(HetplanError):
    """Optimizer step rejected because a gradient contained NaN or inf."""


class CheckpointError(HetplanError):
    """Checkpoint file is malformed or incompatible with the model."""


class SceneError(HetplanError):
    """Scene construction or validation failure."""


class PushInfeasible(HetplanError):
    """No constant-level push route exists for the requested move."""


class TargetOccupied(HetplanError):
    """The requested target footprint overlaps another object."""


class NotGraspable(HetplanError):
    """Pick-place requested on an object wider than the gripper opening."""


class InvalidTask(HetplanError):
    """Task cannot be solved by any primitive sequence.

    Raised for an ungraspable object whose goal sits on a different
    height level: pushing cannot cross levels and picking is impossible.
    """


class PlannerExhausted(HetplanError):
    """The expert search hit its node budget without finding a plan."""


class SceneTooCrowded(HetplanError):
    """Rejection sampling failed to place all requested objects."""


class DatasetError(HetplanError):
    """Dataset file is truncated, tombstoned, or has a wrong schema."""
