"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
DataError (and subclasses) -> 3, DivergenceError -> 4.
"""

from __future__ import annotations


class TokcompError(Exception):
    """Base class for all package errors."""


class DimensionError(TokcompError):
    """Tensor shapes do not conform to an operation's contract."""


class ConfigurationError(TokcompError):
    """Invalid hyperparameter, flag, or model configuration."""


class DataError(TokcompError):
    """Problem with an input dataset or feature file."""


class ParseError(DataError):
    """Malformed record in a dataset file; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyDatasetError(DataError):
    """A dataset or split turned out to be empty."""


class AlignmentError(DataError):
    """Compressed sentence is not a subsequence of the original, or
    feature-file ids do not line up with the dataset."""


class FormatError(DataError):
    """Binary file magic/header mismatch."""


class IntegrityError(DataError):
    """Binary file is truncated or internally inconsistent."""


class DegenerateBatchError(TokcompError):
    """Loss requested over a batch with no valid (unpadded) positions."""


class DivergenceError(TokcompError):
    """Training produced a non-finite loss."""
