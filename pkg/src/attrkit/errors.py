"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid run configuration (unknown keys, bad values, missing sections)."""


class DataError(ToolkitError):
    """Input data violates a contract (missing files, bad shapes, bad manifests)."""


class LoadError(DataError):
    """A file could not be decoded into a valid array or manifest."""


class ShapeError(DataError):
    """Array shapes are incompatible with the requested operation."""


class NumericError(ToolkitError):
    """A quantity is numerically undefined (non-finite values, empty denominators)."""
