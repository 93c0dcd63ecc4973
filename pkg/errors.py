"""
Exception types shared by the discovery modules.
All of them are ValueErrors so plain validation handlers still catch them.
"""


class DiscoveryError(ValueError):
    """Base class for every precondition failure raised by this project."""


class NotPrimeError(DiscoveryError):
    pass


class NotDivisorError(DiscoveryError):
    pass


class ZeroInverseError(DiscoveryError):
    pass


class OutOfRangeError(DiscoveryError):
    pass


class KTooLargeError(DiscoveryError):
    pass


class DimensionMismatchError(DiscoveryError):
    pass


class ConfigError(DiscoveryError):
    """Raised when an experiment configuration key is missing or invalid."""
