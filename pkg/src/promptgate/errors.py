"""Exception types shared across the gateway layers."""

from __future__ import annotations


class PromptGateError(Exception):
    """Base class for all gateway errors."""


class InputTooLarge(PromptGateError):
    """Input exceeds the configured byte limit."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"input is {size} bytes, limit is {limit}")
        self.size = size
        self.limit = limit


class EmptyInput(PromptGateError):
    """Operation requires non-empty text."""


class RegistryLoadError(PromptGateError):
    """A rule file is malformed; carries file and line context."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class RegistryValidationError(PromptGateError):
    """Loaded rule set does not meet the required category counts."""


class DimensionError(PromptGateError):
    """Vector dimensions disagree."""


class DegenerateVector(PromptGateError):
    """Zero vector where a direction is required."""


class CorpusEmpty(PromptGateError):
    """Similarity lookup against an empty exemplar corpus."""


class ProviderUnavailable(PromptGateError):
    """An external provider (embedding server, LLM endpoint) cannot be reached."""


class NotFound(PromptGateError):
    """Unknown review item id."""


class AlreadyResolved(PromptGateError):
    """Review item was resolved earlier; resolution is exactly-once."""


class DatasetError(PromptGateError):
    """Evaluation dataset is malformed; carries the offending line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ValidationError(PromptGateError):
    """A value is outside its documented range."""
