"""
Run artifacts: JSON reports, CSV tables, the stdout summary and optional
plotly heatmaps.

All JSON is written with sorted keys and no timestamps, so the same run
produces byte-identical files.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from ..pool.pool import PromptPool
from ..serialization import atomic_write
from ..training.evaluation import AccuracyMatrix, MatrixEvaluation
from ..training.metrics import MetricsReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    atomic_write(Path(path), (text + "\n").encode("utf-8"))
    return Path(path)


def write_csv(path: Path, frame: pd.DataFrame, index: bool = True) -> Path:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write(Path(path), buffer.getvalue().encode("utf-8"))
    return Path(path)


def metrics_payload(
    evaluation: MatrixEvaluation,
    report: MetricsReport,
    provenance: Dict[str, Any],
    config_hash: str,
    pool_hash: str,
) -> Dict[str, Any]:
    """Everything metrics.json holds; identical for `train` and `eval` of one run."""
    return {
        "config_hash": config_hash,
        "pool_config_hash": pool_hash,
        "seed": provenance.get("seed"),
        "config": provenance,
        "task_ids": evaluation.matrix.task_ids,
        "accuracy_matrix": evaluation.matrix.values,
        "routes": evaluation.routes,
        "metrics": report.model_dump(mode="json"),
    }


def matrix_long_frame(matrix: AccuracyMatrix) -> pd.DataFrame:
    """One row per (step, task) cell."""
    rows = []
    for r, label in enumerate(matrix.row_labels()):
        for c, task_id in enumerate(matrix.task_ids):
            rows.append(
                {"step": r, "row": label, "task_id": task_id, "accuracy": matrix.values[r][c]}
            )
    return pd.DataFrame(rows)


def write_metrics(
    output_dir: Path,
    evaluation: MatrixEvaluation,
    report: MetricsReport,
    provenance: Dict[str, Any],
    config_hash: str,
    pool_hash: str,
) -> Path:
    """Write metrics.json, metrics.csv (cells) and metrics_summary.csv; returns the JSON path."""
    output_dir = Path(output_dir)
    payload = metrics_payload(evaluation, report, provenance, config_hash, pool_hash)
    path = write_json(output_dir / "metrics.json", payload)
    seed = provenance.get("seed")
    cells = matrix_long_frame(evaluation.matrix).assign(config_hash=config_hash, seed=seed)
    write_csv(output_dir / "metrics.csv", cells, index=False)
    summary = report.to_frame().assign(config_hash=config_hash, seed=seed)
    write_csv(output_dir / "metrics_summary.csv", summary)
    logger.info("Wrote metrics to %s", path)
    return path


def format_summary(matrix: AccuracyMatrix, report: MetricsReport) -> str:
    """Human-readable accuracy matrix plus the aggregate metrics."""

    def fmt(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{value:.4f}"

    lines = [
        "Accuracy matrix",
        matrix.to_frame().to_string(float_format=lambda v: f"{v:.4f}"),
        "",
        f"Transfer  {fmt(report.transfer)}  (delta {fmt(report.transfer_delta)})",
        f"Avg       {fmt(report.avg)}  (delta {fmt(report.avg_delta)})",
        f"Avg*      {fmt(report.avg_trained)}",
        f"Last      {fmt(report.last)}  (delta {fmt(report.last_delta)})",
        f"BWT       {fmt(report.backward_transfer)}",
        f"Zero-shot {fmt(report.zero_shot)}",
    ]
    return "\n".join(lines)


def sweep_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows))


def _heatmap(
    values: np.ndarray, x: List[str], y: List[str], title: str, zmin: float, zmax: float
) -> go.Figure:
    figure = go.Figure(
        data=go.Heatmap(
            z=values,
            x=x,
            y=y,
            zmin=zmin,
            zmax=zmax,
            colorscale="Viridis",
            text=np.round(values, 3),
            texttemplate="%{text}",
        )
    )
    figure.update_layout(title=title, yaxis={"autorange": "reversed"})
    return figure


def _write_figure(figure: go.Figure, path: Path, div_id: str) -> Path:
    html = figure.to_html(full_html=True, include_plotlyjs="cdn", div_id=div_id)
    atomic_write(Path(path), html.encode("utf-8"))
    logger.info("Wrote plot %s", path)
    return Path(path)


def plot_accuracy_matrix(matrix: AccuracyMatrix, path: Path) -> Path:
    figure = _heatmap(
        matrix.array, matrix.task_ids, matrix.row_labels(), "Accuracy matrix", 0.0, 1.0
    )
    return _write_figure(figure, path, "accuracy-matrix")


def plot_pool_keys(pool: PromptPool, path: Path) -> Path:
    ids = pool.task_ids
    figure = _heatmap(pool.key_similarity_matrix(), ids, ids, "Pool key similarity", -1.0, 1.0)
    return _write_figure(figure, path, "pool-keys")


def pool_frame(pool: PromptPool) -> pd.DataFrame:
    """One row per pool entry."""
    rows = []
    for index, entry in enumerate(pool):
        rows.append(
            {
                "index": index,
                "task_id": entry.task_id,
                "creation_step": entry.creation_step,
                "prompt_depth": entry.prompts.depth,
                "prompt_length": entry.prompts.length,
            }
        )
    return pd.DataFrame(rows)
