"""
Configuration and dataset models.
"""

from .config import (
    BenchmarkConfig,
    EncoderConfig,
    PretrainConfig,
    PromptMode,
    TokenSeq,
    TrainConfig,
    TransferMode,
    canonical_hash,
    pool_config_hash,
)
from .dataset import TaskDataset

__all__ = [
    "TokenSeq",
    "PromptMode",
    "TransferMode",
    "EncoderConfig",
    "TrainConfig",
    "PretrainConfig",
    "BenchmarkConfig",
    "canonical_hash",
    "pool_config_hash",
    "TaskDataset",
]
