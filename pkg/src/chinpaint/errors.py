"""Exception hierarchy for chinpaint."""


class ChinpaintError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ChinpaintError):
    """Invalid input data or configuration (exit code 2 at the CLI)."""


class NumericalError(ChinpaintError):
    """A numerical procedure failed to converge or produced bad values
    (exit code 3 at the CLI)."""


class GridMismatchError(ValidationError):
    """Two fields on different grids were combined."""


class NonZeroMeanError(ValidationError):
    """Inverse Neumann Laplacian applied to a field with nonzero mean."""


class NonBinaryMaskError(ValidationError):
    """A mask field contained values other than 0 and 1."""


class NoRootError(ValidationError):
    """The double-well minimum does not exist (theta >= theta_c)."""


class TrajectoryMismatchError(ValidationError):
    """A trajectory does not match the solver configuration or grid."""


class Alpha2NotZeroError(ValidationError):
    """A second-order (Hessian) path was requested with a nonzero
    final-time tracking weight."""


class EmptyOrFullMaskError(ValidationError):
    """A damage mask covers nothing or everything."""


class UnsupportedFormatError(ValidationError):
    """An image file is in an unsupported format."""


class DimensionMismatchError(ValidationError):
    """Loaded image dimensions do not match the configured grid."""


class ConfigError(ValidationError):
    """A run configuration file is missing, malformed, or inconsistent."""


class PicardDivergedError(NumericalError):
    """The Picard iteration for the fidelity term exceeded its sweep cap."""


class NonFiniteError(NumericalError):
    """A NaN or Inf appeared during time integration."""


class LineSearchFailedError(NumericalError):
    """The Armijo backtracking line search exhausted its halvings."""


class NotStationaryError(NumericalError):
    """The relaxation toward a stationary state hit its step cap."""
