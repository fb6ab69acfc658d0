"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (noise parameters, ring spec, CLI flags)."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, frame alignment)."""
