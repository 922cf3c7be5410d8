"""Exception hierarchy shared by every module."""


class RoiPoseError(Exception):
    """Base class for all library errors."""


class ValidationError(RoiPoseError, ValueError):
    """Input violates a documented precondition."""


class DegenerateInputError(ValidationError):
    """Input is numerically degenerate (zero-norm quaternion, zero-extent box, ...)."""


class SingularConfigurationError(RoiPoseError, ArithmeticError):
    """Rotation between antipodal directions has no unique axis."""


class ProjectionError(RoiPoseError, ValueError):
    """A point lies at or behind the camera plane."""

    def __init__(self, index, depth):
        self.index = int(index)
        self.depth = float(depth)
        super().__init__(f"point {self.index} has depth {self.depth!r} (must be > 1e-9)")


class RangeError(RoiPoseError, OverflowError):
    """Value outside the representable range of a recovery formula."""


class ParseError(RoiPoseError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GenerationError(RoiPoseError, RuntimeError):
    """Synthetic scene generation could not satisfy its constraints."""
