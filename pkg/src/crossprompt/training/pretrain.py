"""
Contrastive pretraining of the stand-in backbone on the base set.

Each step encodes a batch of base images and every base class name, then
averages two cross-entropies at temperature tau:

    image -> text   each image against all class texts, target its class
    text -> image   each class present in the batch against the batch images,
                    target uniform over the images of that class

All backbone tensors are trained; the result is frozen from then on.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..encoders.backbone import BackboneWeights, init_backbone
from ..encoders.text import text_encode
from ..encoders.vision import image_encode
from ..exceptions import ContractViolation, PretrainingFailure
from ..models.config import EncoderConfig, PretrainConfig
from ..models.dataset import TaskDataset
from ..numeric import ops
from ..numeric.optim import AdamW
from ..numeric.rng import Rng
from ..numeric.tensor import GradTape, backward
from .evaluation import accuracy
from .inference import base_predictions
from .objective import ce_loss, scores, soft_cross_entropy
from .sampling import sample_batch

logger = logging.getLogger(__name__)


class PretrainResult(BaseModel):
    """Pretrained weights plus how the run went."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: BackboneWeights
    initial_accuracy: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0, description="Held-out base zero-shot accuracy")
    iterations: int = Field(ge=0)
    reached_target: bool
    loss_trace: List[float] = Field(default_factory=list)


def contrastive_loss(
    weights: BackboneWeights,
    images: np.ndarray,
    labels: np.ndarray,
    class_names,
    tau: float,
):
    """Symmetric image/text cross-entropy of one batch."""
    x = image_encode(weights, images)
    y = text_encode(weights, class_names)
    logits = scores(x, y)
    image_to_text = ce_loss(logits, labels, tau)

    present = np.unique(labels)
    targets = (labels[None, :] == present[:, None]).astype(np.float64)
    targets /= targets.sum(axis=1, keepdims=True)
    per_class = ops.take_rows(ops.transpose(logits), present)
    text_to_image = soft_cross_entropy(per_class, targets, tau)
    return ops.scale(ops.add(image_to_text, text_to_image), 0.5)


def zero_shot_accuracy(weights: BackboneWeights, dataset: TaskDataset) -> float:
    """Prompt-free accuracy on the held-out split."""
    predictions = base_predictions(weights, dataset.test_images, dataset.class_names)
    return accuracy(predictions, dataset.test_labels)


def pretrain_base(
    config: PretrainConfig,
    base: TaskDataset,
    encoder: Optional[EncoderConfig] = None,
    weights: Optional[BackboneWeights] = None,
    strict: bool = False,
) -> PretrainResult:
    """
    Pretrain the dual encoder until held-out accuracy reaches the target.

    Args:
        config: pretraining settings
        base: base set from the benchmark generator
        encoder: backbone shape, used when `weights` is not given
        weights: starting weights; a fresh random backbone when None
        strict: raise instead of returning when the target is missed

    Returns:
        PretrainResult

    Raises:
        PretrainingFailure: If strict and the target was not reached
        ContractViolation: If the base set has no training samples
    """
    if base.n_train == 0:
        raise ContractViolation("base set has no training samples")
    rng = Rng(config.seed).child("pretrain")
    if weights is None:
        weights = init_backbone(encoder or EncoderConfig(), rng.child("init"), config.init_std)
    batch_rng = rng.child("batches")

    initial = zero_shot_accuracy(weights, base)
    current = initial
    logger.info(
        "Pretraining from held-out accuracy %.4f (target %.2f)", initial, config.target_accuracy
    )

    params = dict(weights.named_tensors())
    optimizer = AdamW(learning_rate=config.learning_rate, weight_decay=config.weight_decay)
    loss_trace: List[float] = []
    step = 0
    while current < config.target_accuracy and step < config.max_iterations:
        index = sample_batch(base.n_train, config.batch_size, batch_rng)
        with GradTape() as tape:
            for name, tensor in params.items():
                tape.watch(tensor, name)
            loss = contrastive_loss(
                weights.replace_tensors(params),
                base.train_images[index],
                base.train_labels[index],
                base.class_names,
                config.temperature,
            )
        grads = backward(tape, loss)
        loss_trace.append(loss.item())
        params = optimizer.step(params, grads)
        step += 1
        if step % config.eval_every == 0 or step == config.max_iterations:
            current = zero_shot_accuracy(weights.replace_tensors(params), base)
            logger.info(
                "pretrain step %d loss %.4f held-out accuracy %.4f", step, loss_trace[-1], current
            )

    weights = weights.replace_tensors(params)
    reached = current >= config.target_accuracy
    if not reached:
        logger.warning(
            "Pretraining stopped at %d iterations with accuracy %.4f < %.2f",
            step,
            current,
            config.target_accuracy,
        )
        if strict:
            raise PretrainingFailure(current, config.target_accuracy, step)
    return PretrainResult(
        weights=weights,
        initial_accuracy=initial,
        accuracy=current,
        iterations=step,
        reached_target=reached,
        loss_trace=loss_trace,
    )
