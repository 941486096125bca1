"""Error types shared across the toolkit.

Both inherit from ValueError so callers that do not care about the
distinction can catch one builtin type. The CLI maps ConfigError to
exit code 1 and DataError to exit code 2.
"""


class DataError(ValueError):
    """Malformed input data: bad CSV rows, corrupt vector files, unknown ids."""


class ConfigError(ValueError):
    """Invalid parameters or pipeline configuration."""


class DimensionError(DataError):
    """Vector length disagreement between operands or against a file header."""
