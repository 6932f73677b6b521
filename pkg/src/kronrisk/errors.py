"""Exception types shared across the package.

The command line maps these onto process exit codes, so the split mirrors
failure categories rather than call sites: bad input data, a bad model
file, and genuinely numerical failures (singular or indefinite matrices).
Programming errors (wrong shapes, modes out of range) raise plain
``ValueError`` as usual.
"""


class KronriskError(Exception):
    """Base class for errors raised by this package."""


class DataError(KronriskError):
    """Input data is malformed, incomplete or degenerate."""


class PanelFormatError(DataError):
    """A panel file violates the CSV contract (header, cells, dates)."""


class MissingDataError(DataError):
    """Missing cells prevent the requested computation."""

    def __init__(self, message, cells=None):
        super().__init__(message)
        self.cells = list(cells) if cells is not None else []


class DegenerateDataError(DataError):
    """Samples carry no variance, so second moments are undefined."""


class ModelFormatError(KronriskError):
    """A serialized model cannot be parsed or fails validation."""


class NumericalError(KronriskError):
    """A matrix is singular/indefinite beyond the configured tolerances."""
