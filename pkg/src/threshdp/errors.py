"""Exception types raised across the package."""


class ThreshDPError(Exception):
    """Base class for package errors."""


class DomainError(ThreshDPError, ValueError):
    """An element, prefix or dataset does not fit its domain."""


class ParameterError(ThreshDPError, ValueError):
    """A privacy or accuracy parameter is outside its allowed range."""


class SampleSizeError(ThreshDPError, ValueError):
    """The input is smaller than the size the utility guarantee needs."""


class ProtocolError(ThreshDPError, RuntimeError):
    """A reduction could not extract an answer from its inner mechanism."""


class ConfigError(ThreshDPError, ValueError):
    """An experiment or audit description is malformed."""


class TowerOverflowError(ThreshDPError, OverflowError):
    """An iterated exponential exceeded the configured bit budget."""
