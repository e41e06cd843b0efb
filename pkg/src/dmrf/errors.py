"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data cannot be read or does not fit the model."""


class ConfigError(ValueError):
    """A configuration is incomplete or inconsistent."""
