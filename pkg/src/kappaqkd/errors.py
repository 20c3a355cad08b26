"""Exception types shared across the package."""


class KappaQKDError(Exception):
    """Base class for all package errors."""


class ConfigError(KappaQKDError, ValueError):
    """Invalid parameter or configuration value."""


class TieError(KappaQKDError, ValueError):
    """z1 - kappa*z2 is exactly zero; the outcome is undefined and the state must be resampled."""


class NotCommitted(KappaQKDError):
    """A trajectory failed the sign-stability / margin commitment test."""


class CommitmentFailure(KappaQKDError):
    """A key round could not produce a committed outcome within the retry budget."""


class InsufficientData(KappaQKDError, ValueError):
    pass


class LengthMismatch(KappaQKDError, ValueError):
    pass
