"""
On-disk benchmark layout:

    <dir>/manifest.json
    <dir>/<task_id>/{train_images,train_labels,test_images,test_labels}.npy

The manifest lists the base set, the domain tasks in order and any extra
provenance (seed, generation attempt, config hash). Writing the same
datasets twice gives byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import ContractViolation
from ..models.dataset import TaskDataset
from ..serialization import atomic_write

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = 1
ARRAYS = ("train_images", "train_labels", "test_images", "test_labels")


def _dataset_record(dataset: TaskDataset) -> Dict[str, Any]:
    return {
        "task_id": dataset.task_id,
        "class_names": [list(name) for name in dataset.class_names],
        "style": dataset.style,
        "style_params": dataset.style_params,
        "n_train": dataset.n_train,
        "n_test": dataset.n_test,
    }


def _write_arrays(directory: Path, dataset: TaskDataset) -> None:
    target = directory / dataset.task_id
    target.mkdir(parents=True, exist_ok=True)
    for name in ARRAYS:
        np.save(target / f"{name}.npy", getattr(dataset, name), allow_pickle=False)


def save_benchmark(
    directory: Path,
    base: TaskDataset,
    domains: List[TaskDataset],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write the base set and domains plus manifest; returns the manifest path."""
    directory = Path(directory)
    ids = [base.task_id, *(d.task_id for d in domains)]
    if len(set(ids)) != len(ids):
        raise ContractViolation(f"task ids must be unique, got {ids}")
    directory.mkdir(parents=True, exist_ok=True)
    for dataset in (base, *domains):
        _write_arrays(directory, dataset)

    manifest = {
        "format": MANIFEST_FORMAT,
        "base": _dataset_record(base),
        "tasks": [_dataset_record(d) for d in domains],
        **(extra or {}),
    }
    path = directory / MANIFEST_NAME
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write(path, text.encode("utf-8"))
    logger.info("Saved benchmark with %d tasks to %s", len(domains), directory)
    return path


def _load_dataset(directory: Path, record: Dict[str, Any]) -> TaskDataset:
    folder = directory / record["task_id"]
    arrays = {}
    for name in ARRAYS:
        path = folder / f"{name}.npy"
        if not path.is_file():
            raise FileNotFoundError(f"Dataset array not found: {path}")
        arrays[name] = np.load(path, allow_pickle=False)
    return TaskDataset(
        task_id=record["task_id"],
        class_names=[tuple(name) for name in record["class_names"]],
        style=record.get("style", "neutral"),
        style_params=record.get("style_params", {}),
        **arrays,
    )


def load_manifest(directory: Path) -> Dict[str, Any]:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"Benchmark manifest not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_benchmark(directory: Path) -> Tuple[TaskDataset, List[TaskDataset], Dict[str, Any]]:
    """Read back (base set, domain tasks in order, manifest)."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    base = _load_dataset(directory, manifest["base"])
    domains = [_load_dataset(directory, record) for record in manifest["tasks"]]
    logger.info("Loaded benchmark with %d tasks from %s", len(domains), directory)
    return base, domains, manifest
