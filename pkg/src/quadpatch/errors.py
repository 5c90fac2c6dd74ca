"""Exception types shared across the package."""


class QuadpatchError(Exception):
    """Base class for all quadpatch errors."""


class ConfigError(QuadpatchError):
    """Invalid parameter or parameter combination (CLI exit code 2)."""


class InputError(QuadpatchError):
    """Unreadable or malformed input data (CLI exit code 1)."""
