"""Task dataset model."""

from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import TokenSeq


class TaskDataset(BaseModel):
    """
    One domain's classification task.

    Images are (n, H, W, C) float64 arrays; labels index into class_names.
    Evaluation scopes candidate classes to this dataset's own class names.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    task_id: str = Field(min_length=1)
    class_names: List[TokenSeq] = Field(min_length=1)
    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    style: str = Field(default="neutral", description="Name of the domain style transform")
    style_params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_labels(self) -> "TaskDataset":
        n_classes = len(self.class_names)
        for split in ("train", "test"):
            images = getattr(self, f"{split}_images")
            labels = getattr(self, f"{split}_labels")
            if images.ndim != 4:
                raise ValueError(f"{split}_images must be (n, H, W, C), got {images.shape}")
            if labels.shape != (images.shape[0],):
                raise ValueError(f"{split}_labels shape {labels.shape} does not match images")
            if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
                raise ValueError(f"{split}_labels must index {n_classes} class names")
        return self

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_train(self) -> int:
        return int(self.train_images.shape[0])

    @property
    def n_test(self) -> int:
        return int(self.test_images.shape[0])
