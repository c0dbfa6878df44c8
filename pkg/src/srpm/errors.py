"""Exception types raised across the package."""


class SrpmError(Exception):
    """Base class for all package errors."""


class ConfigError(SrpmError, ValueError):
    """Invalid configuration value or document."""


class FramingError(SrpmError, ValueError):
    """Bit buffer or serialized payload has the wrong length or framing."""


class DimensionError(SrpmError, ValueError):
    """Array argument has an unusable shape or size."""


class CorrelationError(SrpmError, ValueError):
    """Correlation matrix is not Hermitian PSD within tolerance."""


class DegenerateInputError(SrpmError, ValueError):
    """Input is degenerate (zero vector, empty alphabet, ...)."""


class DomainError(SrpmError, ValueError):
    """Argument lies outside the valid domain of an analytical transform."""


class ComplexityError(SrpmError, RuntimeError):
    """Requested enumeration exceeds the configured size cap."""


class RadiusExhaustedError(SrpmError, RuntimeError):
    """Tree search found no leaf within the radius after all restarts."""


class SingularChannelError(SrpmError, RuntimeError):
    """Channel matrix is rank deficient for the requested equalizer."""
