"""Exception types shared across the package."""


class FormatError(ValueError):
    """A binary file or manifest does not match its declared layout."""


class ValidationError(ValueError):
    """Data violates an invariant (non-finite values, bad dims, bad labels)."""


class ConfigError(ValueError):
    """A pipeline configuration references unknown items or illegal settings."""


class TrainingError(RuntimeError):
    """A model or reducer cannot be fitted on the given data."""
