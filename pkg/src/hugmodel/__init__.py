"""Detection of mixing sources with the Hug Gibbs point process."""
from .errors import ConfigError, DataError, DomainError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "DomainError", "__version__"]
