"""Exception hierarchy.

Errors are grouped by what a caller can do about them: ``UsageError`` for bad
configuration or arguments, ``DataError`` for problems with input files and
datasets, ``RuntimeFailure`` for everything raised while computing.  The CLI
maps the three groups to exit codes 1, 2 and 3.
"""
from __future__ import annotations


class RoiRankError(Exception):
    """Base class for all package errors."""


class UsageError(RoiRankError):
    pass


class DataError(RoiRankError):
    pass


class RuntimeFailure(RoiRankError):
    pass


# -- usage ------------------------------------------------------------------

class ConfigError(UsageError, ValueError):
    pass


class InvalidSlicingError(UsageError, ValueError):
    pass


# -- data -------------------------------------------------------------------

class DataLoadError(DataError):
    pass


class ValidationError(DataError, ValueError):
    def __init__(self, message: str, subject_id: str | None = None, roi: int | None = None):
        super().__init__(message)
        self.subject_id = subject_id
        self.roi = roi


class EmptyDatasetError(DataError, ValueError):
    pass


class SplitError(DataError, ValueError):
    pass


class SamplingError(DataError, ValueError):
    pass


class ClassAbsentError(SamplingError):
    pass


class EvaluationError(DataError, ValueError):
    pass


# -- numerics ---------------------------------------------------------------

class ShapeError(RuntimeFailure, ValueError):
    pass


class SequenceTooShortError(ShapeError):
    pass


class DegenerateBatchError(RuntimeFailure, ValueError):
    pass


class InvalidLabelError(RuntimeFailure, ValueError):
    pass


class OptimizerStateError(RuntimeFailure):
    pass


class OracleInvalidError(RuntimeFailure):
    pass


class CheckpointError(DataError):
    pass


class ReportError(DataError):
    pass
