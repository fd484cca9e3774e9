"""Exception types shared across the package."""


class KeplerHeisenbergError(Exception):
    """Base class for all package-specific errors."""


class CollisionError(KeplerHeisenbergError):
    """A state (or an integration step) reached the singularity rho = 0."""


class StepFailureError(KeplerHeisenbergError):
    """The implicit-stage fixed-point iteration failed to converge.

    When raised from a full integration, ``trajectory`` carries the
    trajectory accumulated so far.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ZAxisError(KeplerHeisenbergError):
    """An angle unwrap was requested along a segment touching the z-axis."""


class ClassificationError(KeplerHeisenbergError):
    """A trajectory could not be classified (winding non-integer, H != 0, ...)."""
