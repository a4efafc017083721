"""
Error Types

Every failure the pipeline reports on purpose derives from OpenSetIdsError.
Each subclass carries a short, stable ``code`` that the CLI prints in its
single-line error prefix.
"""

from typing import Any, Dict, Optional


class OpenSetIdsError(Exception):
    """Base class for all expected pipeline failures."""

    code = "error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        return self.message


class KddParseError(OpenSetIdsError):
    """A KDD text row could not be parsed."""

    code = "parse"

    def __init__(self, message: str, line_number: Optional[int] = None, **context: Any):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message, line_number=line_number, **context)
        self.line_number = line_number


class PreprocessError(OpenSetIdsError):
    code = "preprocess"


class LabelSpaceError(OpenSetIdsError):
    code = "labels"


class SolverError(OpenSetIdsError):
    """The SMO solver failed; ``context`` holds the diagnostics."""

    code = "solver"


class CalibrationError(OpenSetIdsError):
    code = "calibration"


class ConfigError(OpenSetIdsError):
    code = "config"


class ArtifactError(OpenSetIdsError):
    code = "artifact"


class EvaluationError(OpenSetIdsError):
    code = "evaluation"
