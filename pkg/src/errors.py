"""Error hierarchy shared by every stage of the HOG-FDA pipeline.

Each error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class HogFdaError(Exception):
    """Base class for all pipeline errors."""

    exit_code: int = 1

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[stage={self.stage}] {self.message}"
        return self.message


class ConfigError(HogFdaError):
    """Invalid configuration document or override."""

    exit_code = 2

    def __init__(self, message: str, findings: Optional[list] = None, stage: Optional[str] = None):
        super().__init__(message, stage=stage)
        self.findings = findings or []


class ArgumentError(HogFdaError, ValueError):
    """A function was called outside its documented preconditions."""

    exit_code = 2


class DataError(HogFdaError):
    """Input data is malformed or violates a data precondition."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        quarter: Optional[int] = None,
        stage: Optional[str] = None,
    ):
        super().__init__(message, stage=stage)
        self.line = line
        self.quarter = quarter


class DegenerateDataError(DataError):
    """Data carries no usable variation (e.g. all days identical)."""


class NumericFailure(HogFdaError):
    """A numerical procedure failed to produce a usable result."""

    exit_code = 4
