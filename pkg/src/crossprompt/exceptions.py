"""
Exception hierarchy for crossprompt.

Every error raised on purpose by the library derives from CrossPromptError,
so callers (and the CLI) can map failures to exit statuses without
catching unrelated exceptions.
"""

from typing import Optional


class CrossPromptError(Exception):
    """Base class for all crossprompt errors."""


class ContractViolation(CrossPromptError, ValueError):
    """A precondition of a public operation was not met (shapes, ranges, ids)."""


class DegenerateInputError(CrossPromptError, ValueError):
    """Input is well-formed but mathematically degenerate (e.g. a zero-norm vector)."""


class ConfigError(CrossPromptError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class FormatError(CrossPromptError):
    """A binary artifact could not be decoded."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PoolFormatError(FormatError):
    """Invalid prompt pool file."""


class CheckpointFormatError(FormatError):
    """Invalid backbone checkpoint file."""


class PretrainingFailure(CrossPromptError):
    """Backbone pretraining stopped before reaching the target accuracy."""

    def __init__(self, achieved_accuracy: float, target_accuracy: float, iterations: int):
        super().__init__(
            f"Pretraining reached accuracy {achieved_accuracy:.4f} after {iterations} "
            f"iterations; target was {target_accuracy:.4f}"
        )
        self.achieved_accuracy = achieved_accuracy
        self.target_accuracy = target_accuracy
        self.iterations = iterations
