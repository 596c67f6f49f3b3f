"""Exception types shared across the package."""


class HrcmError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(HrcmError, ValueError):
    """Invalid configuration, geometry layout, or CLI arguments."""


class CoincidentPointsError(HrcmError, ValueError):
    """A singular kernel was evaluated at zero separation.

    Signals that the caller paired a point with itself (or an exact
    duplicate); self pairs must be excluded before evaluation.
    """


class NumericalError(HrcmError, RuntimeError):
    """A dense factorization failed to converge on a pathological block."""
