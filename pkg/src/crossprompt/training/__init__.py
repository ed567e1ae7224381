"""
Continual prompt training, routed inference, pretraining and metrics.
"""

from .evaluation import (
    AccuracyMatrix,
    MatrixEvaluation,
    accuracy,
    evaluate_matrix,
    evaluate_predictions,
    sequence_snapshots,
)
from .inference import base_predictions, infer, infer_batch, prompted_predictions, route
from .metrics import DatasetMetrics, MetricsReport, compute_metrics, metrics
from .objective import ce_loss, make_loss_fn, prompt_loss, scores, soft_cross_entropy
from .pretrain import PretrainResult, contrastive_loss, pretrain_base, zero_shot_accuracy
from .sampling import few_shot_subset, sample_batch
from .trainer import TrainResult, ema, train_sequence, train_task

__all__ = [
    "AccuracyMatrix",
    "MatrixEvaluation",
    "accuracy",
    "evaluate_matrix",
    "evaluate_predictions",
    "sequence_snapshots",
    "base_predictions",
    "prompted_predictions",
    "route",
    "infer",
    "infer_batch",
    "DatasetMetrics",
    "MetricsReport",
    "compute_metrics",
    "metrics",
    "scores",
    "ce_loss",
    "soft_cross_entropy",
    "prompt_loss",
    "make_loss_fn",
    "PretrainResult",
    "contrastive_loss",
    "pretrain_base",
    "zero_shot_accuracy",
    "few_shot_subset",
    "sample_batch",
    "TrainResult",
    "ema",
    "train_task",
    "train_sequence",
]
