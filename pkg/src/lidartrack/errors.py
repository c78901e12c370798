"""Exception types raised across the toolkit."""


class LidarTrackError(Exception):
    """Base class for all toolkit errors."""


class DegenerateInput(LidarTrackError, ValueError):
    pass


class UndefinedDistance(LidarTrackError, ValueError):
    pass


class NoCluster(LidarTrackError):
    pass


class SingularGate(LidarTrackError, ArithmeticError):
    pass


class SingularInnovation(LidarTrackError, ArithmeticError):
    pass


class InvalidSpec(LidarTrackError, ValueError):
    """Scenario or config content is malformed; ``key`` names the offender."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class AlignmentError(LidarTrackError, ValueError):
    pass
