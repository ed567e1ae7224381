"""
Task prototypes.

A task's key is the unit-normalized sum of its class-name embeddings under
the frozen, prompt-free text encoder. It depends only on the backbone and
the class names, never on prompts or pool contents.
"""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from ..encoders.backbone import BackboneWeights
from ..encoders.text import base_text_encode
from ..exceptions import ContractViolation, DegenerateInputError
from ..models.config import TokenSeq
from ..numeric.tensor import Tensor, no_tape

UNIT_NORM_TOLERANCE = 1e-12


class Prototype(BaseModel):
    """Unit-norm key vector in the joint embedding space."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vector: Tensor

    @field_validator("vector")
    @classmethod
    def check_unit_norm(cls, v: Tensor) -> Tensor:
        if v.ndim != 1:
            raise ValueError(f"prototype must be a vector, got shape {v.shape}")
        norm = float(np.linalg.norm(v.data))
        if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
            raise ValueError(f"prototype must have unit norm, got {norm!r}")
        return v

    @property
    def array(self) -> np.ndarray:
        return self.vector.data


def with_template(class_names: Sequence[TokenSeq], template: TokenSeq = ()) -> list:
    """Prefix every class name with the template tokens."""
    return [tuple(template) + tuple(name) for name in class_names]


def prototype_from_embeddings(embeddings: np.ndarray) -> Prototype:
    """Normalize the row sum of (N_c, d) class embeddings, summed in row order."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise ContractViolation("at least one class embedding is required")
    total = np.zeros(embeddings.shape[1], dtype=np.float64)
    for row in embeddings:
        total = total + row
    norm = float(np.sqrt(np.dot(total, total)))
    if norm == 0.0:
        raise DegenerateInputError("class embeddings sum to the zero vector")
    return Prototype(vector=Tensor(total / norm))


def extract_prototype(
    weights: BackboneWeights,
    class_names: Sequence[TokenSeq],
    template: TokenSeq = (),
) -> Prototype:
    """
    Key of a task from its class names.

    Class names are encoded and summed in sorted order, so any permutation
    of the same class list gives a bit-identical prototype.
    """
    if not class_names:
        raise ContractViolation("extract_prototype needs at least one class name")
    ordered = sorted(with_template(class_names, template))
    with no_tape():
        embeddings = base_text_encode(weights, ordered).data
    return prototype_from_embeddings(embeddings)
