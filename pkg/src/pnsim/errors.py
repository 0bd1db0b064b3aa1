"""Exception types shared across the package."""


class PnsimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(PnsimError, ValueError):
    """A numeric or structural argument is outside its allowed range."""


class DegenerateSourceError(PnsimError, ValueError):
    """A photon-number distribution has no usable mass (e.g. p1 + pm = 0)."""


class UndefinedPosteriorError(PnsimError, ValueError):
    """A conditional distribution is requested where every branch has zero mass."""


class ConfigError(PnsimError, ValueError):
    """A run configuration failed validation.

    Messages include the offending field path so CLI users can locate
    the problem without reading a traceback.
    """
