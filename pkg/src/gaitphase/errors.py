"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it so callers
can branch on failures without parsing messages.
"""

from __future__ import annotations


class GaitPhaseError(Exception):
    category = "error"


class InvalidParameterError(GaitPhaseError, ValueError):
    category = "invalid-parameter"


class NonFiniteInputError(GaitPhaseError, ValueError):
    category = "non-finite-input"


class InvalidStrideError(GaitPhaseError, ValueError):
    category = "invalid-stride"


class ZeroVarianceError(GaitPhaseError, ValueError):
    category = "zero-variance"


class InsufficientDataError(GaitPhaseError, ValueError):
    category = "insufficient-data"


class UndefinedPhaseError(GaitPhaseError, ValueError):
    category = "undefined-phase"


class InvalidSpecError(GaitPhaseError, ValueError):
    category = "invalid-spec"


class InvalidInputError(GaitPhaseError, ValueError):
    category = "invalid-input"


class InvalidComparisonError(GaitPhaseError, ValueError):
    category = "invalid-comparison"


class InvalidConfigError(GaitPhaseError, ValueError):
    category = "invalid-config"


class InvalidSplitError(GaitPhaseError, ValueError):
    category = "invalid-split"


class UnsupportedRateError(GaitPhaseError, ValueError):
    category = "unsupported-rate"


class EmptyDatasetError(GaitPhaseError, ValueError):
    category = "empty-dataset"


class IncompatibleModelError(GaitPhaseError, ValueError):
    category = "incompatible-model"


class SessionParseError(GaitPhaseError, ValueError):
    category = "parse-error"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFileError(GaitPhaseError, ValueError):
    category = "model-file"


class TrainingDivergedError(GaitPhaseError, RuntimeError):
    category = "training-diverged"

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history
