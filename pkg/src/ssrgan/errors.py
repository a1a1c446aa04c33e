"""Exception types shared across the package.

The CLI maps ConfigError/FormatError to exit code 1 (bad input) and
NumericsError to exit code 2 (runtime/numerical failure).
"""


class ConfigError(ValueError):
    """Invalid configuration (bad field value, inconsistent layer chain, unknown key)."""


class FormatError(ValueError):
    """Malformed file on disk (checkpoint, recording, manifest)."""


class NumericsError(ArithmeticError):
    """Non-finite value encountered where a finite one is required."""
