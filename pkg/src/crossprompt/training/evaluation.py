"""
Accuracy matrix evaluation.

Row r holds test accuracies with the pool as it stood after task r (row 0:
empty pool, i.e. zero-shot); column c is task c. Each distinct
(route, dataset) pair is evaluated once and shared by every cell that
takes that route, so a column whose route does not change produces
bit-identical predictions across rows.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..encoders.backbone import BackboneWeights
from ..exceptions import ContractViolation
from ..models.config import TrainConfig, TransferMode
from ..models.dataset import TaskDataset
from ..pool.pool import PoolEntry, PromptPool
from ..pool.prototype import extract_prototype
from .inference import base_predictions, prompted_predictions, route

logger = logging.getLogger(__name__)

ZERO_SHOT_ROW = "zero-shot"


class AccuracyMatrix(BaseModel):
    """(N+1) x N test accuracies; row 0 is before any task was trained."""

    task_ids: List[str] = Field(min_length=1)
    values: List[List[float]]

    @model_validator(mode="after")
    def check_shape(self) -> "AccuracyMatrix":
        n = len(self.task_ids)
        if len(self.values) != n + 1 or any(len(row) != n for row in self.values):
            raise ValueError(f"accuracy matrix for {n} tasks must be {n + 1} x {n}")
        for row in self.values:
            for value in row:
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"accuracy {value} outside [0, 1]")
        return self

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    def row_labels(self) -> List[str]:
        return [ZERO_SHOT_ROW, *(f"after {task_id}" for task_id in self.task_ids)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.array, index=self.row_labels(), columns=self.task_ids)


class MatrixEvaluation(BaseModel):
    """Accuracy matrix plus the per-cell predictions it was computed from."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: AccuracyMatrix
    predictions: List[List[np.ndarray]]
    routes: List[List[Optional[str]]] = Field(
        description="Task id of the entry serving each cell, None for the zero-shot path"
    )


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    if labels.size == 0:
        return 0.0
    return float(np.mean(predictions == labels))


def evaluate_predictions(
    snapshots: Sequence[PromptPool],
    backbone: BackboneWeights,
    datasets: Sequence[TaskDataset],
    config: TrainConfig,
) -> MatrixEvaluation:
    """
    Evaluate every (snapshot, dataset) cell on the datasets' test splits.

    Args:
        snapshots: pool after steps 0..N (snapshot 0 is normally empty)
        backbone: frozen dual encoder
        datasets: the N tasks in training order
        config: threshold, temperature, template, transfer mode and workers

    Returns:
        MatrixEvaluation with the accuracy matrix and raw predictions
    """
    if len(snapshots) != len(datasets) + 1:
        raise ContractViolation(
            f"need {len(datasets) + 1} pool snapshots for {len(datasets)} tasks, "
            f"got {len(snapshots)}"
        )
    template = config.class_template
    queries = [extract_prototype(backbone, d.class_names, template) for d in datasets]

    plan: List[List[Optional[PoolEntry]]] = []
    for r, snapshot in enumerate(snapshots):
        row = []
        for c, dataset in enumerate(datasets):
            if config.transfer_mode == TransferMode.FORCED_FALLBACK and r < c + 1:
                row.append(None)
                continue
            row.append(
                route(
                    snapshot,
                    backbone,
                    dataset.class_names,
                    config.threshold,
                    template,
                    query=queries[c],
                )
            )
        plan.append(row)

    work: Dict[Tuple[int, int], Tuple[Optional[PoolEntry], int]] = {}
    for row in plan:
        for c, entry in enumerate(row):
            work.setdefault((0 if entry is None else id(entry), c), (entry, c))
    keys = list(work)

    def run(key: Tuple[int, int]) -> np.ndarray:
        entry, c = work[key]
        dataset = datasets[c]
        if entry is None:
            return base_predictions(backbone, dataset.test_images, dataset.class_names, template)
        return prompted_predictions(
            backbone, entry, dataset.test_images, dataset.class_names, config.temperature, template
        )

    logger.info(
        "Evaluating %d x %d accuracy matrix (%d distinct routes, %d workers)",
        len(snapshots),
        len(datasets),
        len(keys),
        config.eval_workers,
    )
    with ThreadPoolExecutor(max_workers=config.eval_workers) as executor:
        results = dict(zip(keys, executor.map(run, keys)))

    predictions: List[List[np.ndarray]] = []
    values: List[List[float]] = []
    routes: List[List[Optional[str]]] = []
    for row in plan:
        row_predictions = []
        for c, entry in enumerate(row):
            row_predictions.append(results[(0 if entry is None else id(entry), c)])
        predictions.append(row_predictions)
        values.append([accuracy(p, d.test_labels) for p, d in zip(row_predictions, datasets)])
        routes.append([None if entry is None else entry.task_id for entry in row])

    matrix = AccuracyMatrix(task_ids=[d.task_id for d in datasets], values=values)
    return MatrixEvaluation(matrix=matrix, predictions=predictions, routes=routes)


def evaluate_matrix(
    snapshots: Sequence[PromptPool],
    backbone: BackboneWeights,
    datasets: Sequence[TaskDataset],
    config: TrainConfig,
) -> AccuracyMatrix:
    """Accuracy matrix of a trained sequence; see evaluate_predictions."""
    return evaluate_predictions(snapshots, backbone, datasets, config).matrix


def sequence_snapshots(pool: PromptPool) -> List[PromptPool]:
    """Pools after steps 0..N of a pool built by train_sequence."""
    return [pool.snapshot(r) for r in range(len(pool) + 1)]
