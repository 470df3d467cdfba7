"""Exception hierarchy shared across the package.

Each error carries a category used by the CLI to pick its exit code:
config -> 1, io/parse -> 2, numeric -> 3.
"""


class TransforestError(Exception):
    category = "config"
    exit_code = 1


class ConfigError(TransforestError):
    """Invalid configuration or usage."""

    category = "config"
    exit_code = 1


class DimensionMismatch(ConfigError):
    """Operands with incompatible shapes."""


class IoError(TransforestError):
    """File could not be read or written."""

    category = "io"
    exit_code = 2


class ParseError(TransforestError):
    """File exists but its content is malformed or inadequate."""

    category = "parse"
    exit_code = 2


class NumericError(TransforestError):
    """A numerical routine failed (non-convergence, singular system)."""

    category = "numeric"
    exit_code = 3
