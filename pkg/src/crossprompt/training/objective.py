"""
Contrastive objective.

Similarity scores are cosines between image features and class text
features; the loss is cross-entropy over scores divided by a temperature.
"""

from typing import Callable, Dict, Sequence

import numpy as np

from ..encoders.backbone import BackboneWeights
from ..encoders.text import text_encode
from ..encoders.vision import image_encode
from ..exceptions import ContractViolation
from ..models.config import TokenSeq
from ..numeric import ops
from ..numeric.tensor import Tensor
from ..prompting.prompts import AlignerParams, PromptSet, cross_modal_prompts


def scores(x: Tensor, y: Tensor) -> Tensor:
    """
    Cosine similarity of image features against class features.

    Args:
        x: (d,) or (B, d) image features
        y: (N_c, d) class text features

    Returns:
        (N_c,) or (B, N_c) scores

    Raises:
        DegenerateInputError: If any feature vector is zero
    """
    if y.ndim != 2 or x.shape[-1] != y.shape[-1]:
        raise ContractViolation(f"cannot score features {x.shape} against classes {y.shape}")
    return ops.matmul(ops.l2_normalize(x), ops.transpose(ops.l2_normalize(y)))


def _check_labels(labels: np.ndarray, batch: int, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (batch,) or not np.issubdtype(labels.dtype, np.integer):
        raise ContractViolation(
            f"expected {batch} integer labels, got {labels.shape} {labels.dtype}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ContractViolation(f"labels must lie in [0, {n_classes})")
    return labels.astype(np.int64)


def ce_loss(logits: Tensor, labels: np.ndarray, tau: float) -> Tensor:
    """Mean over the batch of -log softmax(scores / tau)[label]."""
    if logits.ndim != 2:
        raise ContractViolation(f"ce_loss expects (batch, classes) scores, got {logits.shape}")
    labels = _check_labels(labels, logits.shape[0], logits.shape[1])
    picked = ops.take_along_last(ops.log_softmax(logits, tau=tau), labels)
    return ops.neg(ops.mean(picked))


def soft_cross_entropy(logits: Tensor, targets: np.ndarray, tau: float) -> Tensor:
    """Cross-entropy against per-row target distributions, averaged over rows."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ContractViolation(f"targets {targets.shape} do not match scores {logits.shape}")
    if not np.allclose(targets.sum(axis=-1), 1.0):
        raise ContractViolation("target rows must sum to one")
    weighted = ops.mul(ops.log_softmax(logits, tau=tau), ops.constant(targets))
    return ops.neg(ops.mean(ops.sum(weighted, axis=-1)))


def prompted_features(
    backbone: BackboneWeights,
    prompts: PromptSet,
    aligner: AlignerParams,
    images: np.ndarray,
    class_names: Sequence[TokenSeq],
):
    """Image and class features with one task's cross-modal prompts applied."""
    text_injected, visual, visual_injected = cross_modal_prompts(prompts, aligner)
    y = text_encode(backbone, class_names, prompts=prompts.text, injected=text_injected)
    x = image_encode(backbone, images, prompts=visual, injected=visual_injected)
    return x, y


def prompt_loss(
    backbone: BackboneWeights,
    prompts: PromptSet,
    aligner: AlignerParams,
    images: np.ndarray,
    labels: np.ndarray,
    class_names: Sequence[TokenSeq],
    tau: float,
) -> Tensor:
    x, y = prompted_features(backbone, prompts, aligner, images, class_names)
    return ce_loss(scores(x, y), labels, tau)


def make_loss_fn(
    backbone: BackboneWeights,
    prompts: PromptSet,
    aligner: AlignerParams,
    images: np.ndarray,
    labels: np.ndarray,
    class_names: Sequence[TokenSeq],
    tau: float,
) -> Callable[[Dict[str, Tensor]], Tensor]:
    """Loss as a function of the named trainable tensors, for the tape and gradcheck."""

    def loss_fn(params: Dict[str, Tensor]) -> Tensor:
        return prompt_loss(
            backbone,
            prompts.replace(params),
            aligner.replace(params),
            images,
            labels,
            class_names,
            tau,
        )

    return loss_fn
