"""Exception hierarchy."""


class RingFilmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RingFilmError, ValueError):
    """Invalid or inconsistent configuration value."""


class ContactPenetration(RingFilmError):
    """The gap became non-positive somewhere on the grid."""


class NonConvergence(RingFilmError):
    """The fixed-point iteration hit its iteration cap.

    In the extended model this is the numerical signature of blow-by, so
    scenario runners treat it as a verdict rather than a crash.
    """

    def __init__(self, message, t=None, iterations=None, change=None):
        super().__init__(message)
        self.t = t
        self.iterations = iterations
        self.change = change


class BlowByChannel(RingFilmError):
    """The pressurised cavity connects both ring edges while p_cc > 0."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DegenerateCell(RingFilmError):
    """A cell needs the saturation branch but its storage coefficient is zero."""
