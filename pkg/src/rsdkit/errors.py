"""Exception hierarchy and process exit codes.

Errors are grouped into three families that map onto CLI exit codes:
configuration problems (bad config files, unknown roles, impossible
schedules), data problems (malformed inputs, degenerate datasets), and
numerical problems (solver non-convergence, singular systems).
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


class ToolkitError(Exception):
    """Base class for all rsdkit errors."""

    exit_code = EXIT_DATA


class ConfigurationError(ToolkitError):
    """Invalid configuration: unknown role, bad grid, impossible schedule."""

    exit_code = EXIT_CONFIG


class InputError(ToolkitError):
    """Caller passed structurally invalid in-memory data."""


class IngestionError(ToolkitError):
    """A raster file could not be parsed; message names the offending field."""


class SchemaError(ToolkitError):
    """A vector/JSON input violates the expected schema."""


class AlignmentError(ToolkitError):
    """Band rasters do not share grid geometry."""


class AmbiguityError(ToolkitError):
    """A pixel is claimed by more than one block polygon."""


class EmptySelectionError(ToolkitError):
    """A filter matched no rows."""


class EmptyDatasetError(ToolkitError):
    """Every row was dropped; nothing left to model."""


class BalanceError(ToolkitError):
    """Class balancing is impossible (single-class input)."""


class SplitError(ToolkitError):
    """Stratified splitting is impossible for the requested fraction."""


class FoldError(ToolkitError):
    """A cross-validation fold is degenerate; message names the fold."""


class NumericalError(ToolkitError):
    """A linear-algebra step failed (singular covariance etc.)."""

    exit_code = EXIT_CONVERGENCE


class ConvergenceError(ToolkitError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    Carries the best iterate found so far in ``partial`` so callers can
    inspect or salvage it.
    """

    exit_code = EXIT_CONVERGENCE

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CapabilityError(ToolkitError):
    """Operation requested from a model type that cannot provide it."""
