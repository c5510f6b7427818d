"""Exception types shared across the package.

The CLI maps these onto exit codes: ``UsageError`` and ``ConfigError`` exit
with status 2; ``SizeLimitError`` is a ``UsageError``.
"""


class UsageError(ValueError):
    """Caller violated a precondition (bad dimension, point outside box, ...)."""


class SizeLimitError(UsageError):
    """Instance too large for the requested exact solver."""


class ConfigError(UsageError):
    """Experiment configuration is malformed or under-determined."""
