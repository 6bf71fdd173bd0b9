"""Exception types, mapped onto CLI exit codes in :mod:`hugmodel.cli`."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class DataError(ValueError):
    """Malformed or unusable input data."""


class DomainError(ValueError):
    """A numerical quantity is undefined for the given input."""
