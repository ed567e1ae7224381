"""Batch sampling and few-shot subsets."""

import numpy as np

from ..exceptions import ContractViolation
from ..models.dataset import TaskDataset
from ..numeric.rng import Rng


def sample_batch(n: int, batch_size: int, rng: Rng) -> np.ndarray:
    """Indices drawn uniformly with replacement."""
    if n == 0:
        raise ContractViolation("cannot sample from an empty training split")
    return rng.integers(0, n, size=batch_size)


def few_shot_subset(dataset: TaskDataset, shots: int, rng: Rng) -> TaskDataset:
    """
    Keep `shots` training examples per class (all of them when a class has
    fewer). The test split is untouched.
    """
    keep = []
    for label in range(dataset.n_classes):
        members = np.flatnonzero(dataset.train_labels == label)
        if members.size > shots:
            members = np.sort(members[rng.choice(members.size, shots)])
        keep.append(members)
    index = np.sort(np.concatenate(keep)) if keep else np.array([], dtype=np.int64)
    return dataset.model_copy(
        update={
            "train_images": dataset.train_images[index],
            "train_labels": dataset.train_labels[index],
        }
    )
