"""
Exception hierarchy shared by every module.

Each error carries the process exit code the CLI reports for it:
1 for usage/configuration problems, 2 for data problems, 3 for numeric failures.
"""

from typing import List, Sequence


class SpeMonitorError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1


class ConfigurationError(SpeMonitorError, ValueError):
    """Invalid configuration value or inconsistent configuration."""

    exit_code = 1


class ParameterError(ConfigurationError):
    """An operation received a parameter outside its domain."""


class DataError(SpeMonitorError, ValueError):
    """Input data could not be used."""

    exit_code = 2


class FormatError(DataError):
    """A file does not follow its expected format."""


class EmptyLogError(DataError):
    """An event log holds no events."""


class VocabularyError(DataError):
    """An activity is not part of the vocabulary."""


class LengthError(DataError):
    """A trace does not fit the fixed encoded length."""


class SplitError(DataError):
    """Too few traces to build a train/validation/test split."""


class CompatibilityError(DataError):
    """An event log does not match the vocabulary stored with a checkpoint."""


class EvaluationError(DataError):
    """Evaluation was requested on an empty dataset."""


class AggregationError(DataError):
    """Reports cannot be aggregated together."""


class ConnectivityError(DataError):
    """The ontology graph is not connected."""

    def __init__(self, components: Sequence[Sequence[str]]):
        self.components: List[List[str]] = [sorted(c) for c in components]
        listing = "; ".join(
            f"[{', '.join(c)}]" for c in self.components
        )
        super().__init__(
            f"Ontology graph has {len(self.components)} connected components: {listing}"
        )


class NumericError(SpeMonitorError, ArithmeticError):
    """A numeric computation failed."""

    exit_code = 3


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""


class ShapeError(SpeMonitorError, ValueError):
    """Tensor shapes do not agree."""

    exit_code = 2
