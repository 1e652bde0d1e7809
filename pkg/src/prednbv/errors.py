"""Exception taxonomy shared across the package."""


class PredNBVError(Exception):
    """Base class for all package errors."""


class ParameterError(PredNBVError, ValueError):
    """Invalid parameter value (non-positive leaf, bad quaternion, ...)."""


class EmptyCloudError(PredNBVError, ValueError):
    """Operation requires a non-empty point cloud."""


class CardinalityError(PredNBVError, ValueError):
    """Point sets must have matching sizes."""


class DegenerateViewpointError(PredNBVError, ValueError):
    """Viewpoint coincides with a cloud point."""


class DegenerateInputError(PredNBVError, ValueError):
    """Input geometry collapses the construction (e.g. d_max = 0)."""


class BoundsError(PredNBVError, ValueError):
    """Position outside the occupancy grid."""


class InvalidPoseError(PredNBVError, ValueError):
    """Sensor pose inside the object or an obstacle."""


class InvalidEndpointError(PredNBVError, ValueError):
    """Path endpoint inside an occupied cell."""


class NoPathError(PredNBVError, RuntimeError):
    """Planner failed to connect start and goal."""


class ZeroGainError(PredNBVError, RuntimeError):
    """Every candidate view has zero information gain."""


class StartVisibilityError(PredNBVError, RuntimeError):
    """Initial pose does not see the object."""


class ExplorationCompleteError(PredNBVError, RuntimeError):
    """No frontier left to explore."""


class PredictorUnavailableError(PredNBVError, RuntimeError):
    """External predictor timed out, disconnected, or replied with an error."""


class ProtocolError(PredNBVError, RuntimeError):
    """Malformed frame on the predictor wire protocol."""


class CloudFormatError(PredNBVError, ValueError):
    """Unparseable PLY/XYZ payload."""
