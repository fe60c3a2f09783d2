"""Exception types shared across the package."""


class SizeError(ValueError):
    """A qubit count or matrix dimension is outside the supported range."""


class InvariantError(ValueError):
    """A structural invariant (completeness, positivity, ...) does not hold."""


class UnsupportedGateError(ValueError):
    """A parametrized gate has no parameter-shift recipe."""


class FormatError(ValueError):
    """A binary or text file does not match its declared format."""


class ConfigError(ValueError):
    """An experiment configuration is invalid. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
