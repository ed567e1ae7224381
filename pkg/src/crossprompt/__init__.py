"""
crossprompt: continual learning with cross-modal prompts on a frozen dual encoder.

Each task trains deep prompts for the text and vision encoders plus
Aligner projections that carry prompts across modalities. Tasks are stored
in a prompt pool keyed by class-name prototypes; inference routes each
query to the closest task or falls back to the zero-shot model.
"""

__version__ = "0.1.0"

from .exceptions import (
    CheckpointFormatError,
    ConfigError,
    ContractViolation,
    CrossPromptError,
    DegenerateInputError,
    FormatError,
    PoolFormatError,
    PretrainingFailure,
)

__all__ = [
    "__version__",
    "CrossPromptError",
    "ContractViolation",
    "DegenerateInputError",
    "ConfigError",
    "FormatError",
    "PoolFormatError",
    "CheckpointFormatError",
    "PretrainingFailure",
]
