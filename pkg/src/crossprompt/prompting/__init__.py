"""
Per-task prompt state: deep prompts, Aligner projections and the
value-pathway injection rule.
"""

from .injection import inject_values
from .prompts import (
    AlignerParams,
    PromptSet,
    count_trainable,
    cross_modal_prompts,
    enumerate_trainable,
    init_aligner,
    init_prompts,
    project_t2v,
    project_v2t,
    trainable_tensors,
)

__all__ = [
    "PromptSet",
    "AlignerParams",
    "init_prompts",
    "init_aligner",
    "project_v2t",
    "project_t2v",
    "cross_modal_prompts",
    "inject_values",
    "trainable_tensors",
    "count_trainable",
    "enumerate_trainable",
]
