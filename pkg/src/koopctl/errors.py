"""Exception types shared across the package."""


class KoopctlError(Exception):
    """Base class for all package-specific failures."""


class FitError(KoopctlError):
    """EDMD fitting failed (bad data, singular transform, defective K)."""


class SynthesisError(KoopctlError):
    """The LMI solver failed numerically."""


class BlowupError(KoopctlError):
    """A simulated trajectory left the finite range.

    Attributes
    ----------
    step : int
        Index of the first invalid transition.
    """

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class FormatError(KoopctlError):
    """A file did not match the expected schema."""
