"""Exception types shared across the package."""


class RateGamesError(Exception):
    """Base class for all library errors."""


class DataError(RateGamesError):
    """Raised when a dataset cannot be loaded or fails validation."""


class EmptySelectionError(RateGamesError):
    """Raised when a rate definition selects no examples."""


class DomainError(RateGamesError):
    """Raised when a metric is queried outside its domain box."""


class ConfigError(RateGamesError):
    """Raised for inconsistent problem or run configuration."""


class OptimizationError(RateGamesError):
    """Raised when a training run cannot proceed (NaNs, degenerate state)."""
