from enum import IntEnum


class ExitCode(IntEnum):
    """
    Process exit codes of the command line front end.
    """
    PASS = 0
    CERTIFICATE_FAILURE = 1
    CONFIGURATION_ERROR = 2


class TFPropError(Exception):
    """Base class of every error raised by the library."""


class ConfigurationError(TFPropError, ValueError):
    """Invalid parameters, unknown kinds or violated preconditions."""


class AdmissibilityError(ConfigurationError):
    """A Sobolev index r outside the range where the propagation law holds."""

    def __init__(self, r: float, s: float):
        self.r = r
        self.s = s
        super().__init__(
            f"r = {r} is not admissible for class s = {s}: "
            f"the propagation law requires 0 < 2r < s - 2d with d = 1"
        )


class GridMismatchError(TFPropError, ValueError):
    """Two signals or operators live on different grids."""


class CoarseLatticeError(TFPropError, ValueError):
    """istft called on a lattice coarser than the grid."""


class NotAFrameError(TFPropError):
    """The Gabor system has a vanishing lower frame bound."""


class InsufficientShellsError(TFPropError):
    """Too few populated radial shells for an envelope regression."""


class TypeIRepresentationError(TFPropError):
    """The upper-left block of the map is singular."""


class TruncationError(TFPropError):
    """The Dyson tail bound is not below one at the requested order."""


class NonHermitianError(TFPropError, ValueError):
    """A perturbation kernel that would make the evolution non-unitary."""


class WrapAroundWarning(UserWarning):
    """A time shift larger than half the grid span wraps around."""


class MarginWarning(UserWarning):
    """A dilation pushed mass outside the margin window."""
