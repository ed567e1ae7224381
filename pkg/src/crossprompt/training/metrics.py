"""
Continual-learning metrics over an accuracy matrix.

Trained rows are rows 1..N (row r: after task r); row 0 is zero-shot.

    transfer     mean of trained-row cells above the diagonal (task not yet trained)
    avg          mean of every trained-row cell
    avg_trained  per-task mean over the rows at and after the task, then averaged
    last         mean of the final row
    backward_transfer  mean of A[r][c] - A[c][c] below the diagonal (negative = forgetting)

`include_zero_shot_row=True` makes transfer count row 0 as well, so the
first task also gets a transfer value.
"""

from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ..exceptions import ContractViolation
from .evaluation import AccuracyMatrix

MatrixLike = Union[AccuracyMatrix, np.ndarray, Sequence[Sequence[float]]]


class DatasetMetrics(BaseModel):
    """Metrics of a single task column."""

    task_id: str
    transfer: Optional[float] = None
    avg: float
    avg_trained: float
    last: float
    zero_shot: Optional[float] = None


class MetricsReport(BaseModel):
    """Aggregate and per-task metrics; None marks a metric with no defining cells."""

    n_tasks: int = Field(gt=0)
    transfer: Optional[float] = None
    avg: float
    avg_trained: float
    last: float
    backward_transfer: Optional[float] = None
    zero_shot: Optional[float] = Field(default=None, description="Mean of row 0")
    transfer_delta: Optional[float] = None
    avg_delta: Optional[float] = None
    last_delta: Optional[float] = None
    per_dataset: List[DatasetMetrics] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """Per-task metrics with an aggregate row appended."""
        rows = [item.model_dump() for item in self.per_dataset]
        rows.append(
            {
                "task_id": "mean",
                "transfer": self.transfer,
                "avg": self.avg,
                "avg_trained": self.avg_trained,
                "last": self.last,
                "zero_shot": self.zero_shot,
            }
        )
        return pd.DataFrame(rows).set_index("task_id")


def _split(matrix: MatrixLike):
    """(task ids, zero-shot row or None, N x N trained rows)."""
    if isinstance(matrix, AccuracyMatrix):
        values = matrix.array
        return list(matrix.task_ids), values[0], values[1:]
    values = np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] == 0:
        raise ContractViolation(f"accuracy matrix must be 2-D and non-empty, got {values.shape}")
    n = values.shape[1]
    task_ids = [f"task-{c + 1}" for c in range(n)]
    if values.shape[0] == n:
        return task_ids, None, values
    if values.shape[0] == n + 1:
        return task_ids, values[0], values[1:]
    raise ContractViolation(f"expected {n} x {n} or {n + 1} x {n} matrix, got {values.shape}")


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def compute_metrics(matrix: MatrixLike, include_zero_shot_row: bool = False) -> MetricsReport:
    """
    Transfer, Avg and Last of an accuracy matrix.

    Args:
        matrix: AccuracyMatrix, or a raw N x N (trained rows only) or
            (N+1) x N (row 0 zero-shot) array
        include_zero_shot_row: count row 0 in transfer

    Returns:
        MetricsReport

    Raises:
        ContractViolation: If the matrix shape is not one of the above
    """
    task_ids, zero_shot, trained = _split(matrix)
    n = trained.shape[1]
    if include_zero_shot_row and zero_shot is None:
        raise ContractViolation("include_zero_shot_row needs a matrix with a zero-shot row")

    per_dataset: List[DatasetMetrics] = []
    transfer_cells: List[float] = []
    baseline_cells: List[float] = []
    backward_cells: List[float] = []
    for c in range(n):
        column = trained[:, c]
        upper = list(column[:c])
        if include_zero_shot_row:
            upper = [float(zero_shot[c]), *upper]
        transfer_cells.extend(upper)
        if zero_shot is not None:
            baseline_cells.extend([float(zero_shot[c])] * len(upper))
        backward_cells.extend(float(column[r] - column[c]) for r in range(c + 1, n))
        per_dataset.append(
            DatasetMetrics(
                task_id=task_ids[c],
                transfer=_mean(upper),
                avg=float(column.mean()),
                avg_trained=float(column[c:].mean()),
                last=float(column[-1]),
                zero_shot=None if zero_shot is None else float(zero_shot[c]),
            )
        )

    transfer = _mean(transfer_cells)
    avg = float(trained.mean())
    avg_trained = float(np.mean([item.avg_trained for item in per_dataset]))
    last = float(trained[-1].mean())

    zero_shot_mean = transfer_delta = avg_delta = last_delta = None
    if zero_shot is not None:
        zero_shot_mean = float(zero_shot.mean())
        avg_delta = avg - zero_shot_mean
        last_delta = last - zero_shot_mean
        if transfer is not None:
            transfer_delta = transfer - float(np.mean(baseline_cells))

    return MetricsReport(
        n_tasks=n,
        transfer=transfer,
        avg=avg,
        avg_trained=avg_trained,
        last=last,
        backward_transfer=_mean(backward_cells),
        zero_shot=zero_shot_mean,
        transfer_delta=transfer_delta,
        avg_delta=avg_delta,
        last_delta=last_delta,
        per_dataset=per_dataset,
    )


metrics = compute_metrics
