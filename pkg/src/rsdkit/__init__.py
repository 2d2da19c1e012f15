"""Sugarcane disease detection toolkit.

End-to-end pipeline for classifying ratoon stunting disease from 20 m
multispectral satellite pixels: raster + block ingestion, vegetation
index features, Welch-t band screening, five classifiers trained from
scratch with cross-validated successive-halving tuning, bootstrap and
permutation evaluation, and a synthetic scene generator with known
ground truth for validating the whole chain.
"""

__version__ = "1.0.0"

from .errors import (
    AlignmentError,
    AmbiguityError,
    BalanceError,
    CapabilityError,
    ConfigurationError,
    ConvergenceError,
    EmptyDatasetError,
    EmptySelectionError,
    FoldError,
    IngestionError,
    InputError,
    NumericalError,
    SchemaError,
    SplitError,
    ToolkitError,
)
from .seeds import derive_seed, rng_for

__all__ = [
    "__version__",
    "derive_seed",
    "rng_for",
    "ToolkitError",
    "ConfigurationError",
    "InputError",
    "IngestionError",
    "SchemaError",
    "AlignmentError",
    "AmbiguityError",
    "EmptySelectionError",
    "EmptyDatasetError",
    "BalanceError",
    "SplitError",
    "FoldError",
    "NumericalError",
    "ConvergenceError",
    "CapabilityError",
]
