"""
Per-task prompt training and the sequential continual-learning loop.

For each task: draw fresh prompts and zero Aligners, compute the task key
from the frozen text encoder, then run AdamW over the prompt tensors only.
The backbone and every earlier pool entry stay untouched.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..encoders.backbone import BackboneWeights, check_frozen
from ..exceptions import ContractViolation
from ..models.config import TrainConfig, pool_config_hash
from ..models.dataset import TaskDataset
from ..numeric.optim import AdamW
from ..numeric.rng import Rng
from ..numeric.tensor import GradTape, backward
from ..pool.pool import PoolEntry, PromptPool
from ..pool.prototype import Prototype, extract_prototype, with_template
from ..prompting.prompts import (
    AlignerParams,
    PromptSet,
    init_aligner,
    init_prompts,
    trainable_tensors,
)
from .objective import make_loss_fn
from .sampling import few_shot_subset, sample_batch

logger = logging.getLogger(__name__)


class TrainResult(BaseModel):
    """Trained state of one task plus its loss trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    task_id: str
    prompts: PromptSet
    aligner: AlignerParams
    key: Prototype
    loss_trace: List[float] = Field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.loss_trace)

    @property
    def outputs(self) -> Tuple[PromptSet, AlignerParams, Prototype]:
        return self.prompts, self.aligner, self.key


def ema(trace: Sequence[float], window: int = 50) -> np.ndarray:
    """Exponential moving average with smoothing 2 / (window + 1), seeded by the first value."""
    values = np.asarray(trace, dtype=np.float64)
    if values.size == 0:
        return values
    alpha = 2.0 / (window + 1.0)
    out = np.empty_like(values)
    out[0] = values[0]
    for i in range(1, values.size):
        out[i] = alpha * values[i] + (1.0 - alpha) * out[i - 1]
    return out


def train_task(
    backbone: BackboneWeights,
    dataset: TaskDataset,
    config: TrainConfig,
    task_index: int = 0,
) -> TrainResult:
    """
    Train one task's prompts and Aligners.

    Args:
        backbone: frozen dual encoder
        dataset: the task's data; only the train split is used
        config: tuning settings
        task_index: position in the task sequence, used to derive the seed

    Returns:
        TrainResult with the trained prompts, Aligners and the task key

    Raises:
        ContractViolation: If the training split is empty
    """
    if dataset.n_train == 0:
        raise ContractViolation(f"task {dataset.task_id!r} has no training samples")

    encoder = backbone.config
    depth = config.depth_for(encoder)
    mode = config.prompt_mode
    rng = Rng(config.seed).child("task", task_index)

    prompts = init_prompts(
        encoder, depth, config.prompt_length, rng.child("prompts"), config.prompt_init_std, mode
    )
    aligner = init_aligner(encoder, depth, mode)
    key = extract_prototype(backbone, dataset.class_names, config.class_template)

    if config.few_shot:
        dataset = few_shot_subset(dataset, config.shots, rng.child("few_shot"))
    class_names = with_template(dataset.class_names, config.class_template)
    iterations = config.effective_iterations
    batch_rng = rng.child("batches")

    params = trainable_tensors(prompts, aligner, mode)
    optimizer = AdamW(
        learning_rate=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    logger.info(
        "Training task %s: %d iterations, depth %d, length %d, mode %s, %d train samples",
        dataset.task_id,
        iterations,
        depth,
        config.prompt_length,
        mode.value,
        dataset.n_train,
    )

    loss_trace: List[float] = []
    for step in range(iterations):
        index = sample_batch(dataset.n_train, config.batch_size, batch_rng)
        loss_fn = make_loss_fn(
            backbone,
            prompts,
            aligner,
            dataset.train_images[index],
            dataset.train_labels[index],
            class_names,
            config.temperature,
        )
        with GradTape() as tape:
            for name, tensor in params.items():
                tape.watch(tensor, name)
            loss = loss_fn(params)
        grads = backward(tape, loss)
        value = loss.item()
        if not np.isfinite(value):
            raise ContractViolation(
                f"non-finite loss at step {step + 1} of task {dataset.task_id!r}"
            )
        loss_trace.append(value)

        params = optimizer.step(params, grads)
        prompts = prompts.replace(params)
        aligner = aligner.replace(params)
        if (step + 1) % config.log_every == 0:
            logger.info(
                "task %s step %d/%d loss %.4f", dataset.task_id, step + 1, iterations, value
            )

    return TrainResult(
        task_id=dataset.task_id,
        prompts=prompts,
        aligner=aligner,
        key=key,
        loss_trace=loss_trace,
    )


TaskCallback = Callable[[int, TrainResult, PromptPool], None]


def train_sequence(
    backbone: BackboneWeights,
    datasets: Sequence[TaskDataset],
    config: TrainConfig,
    on_task_done: Optional[TaskCallback] = None,
) -> PromptPool:
    """
    Train tasks strictly in order, adding each to a new prompt pool.

    Entry r-1 of the returned pool was created at step r, so
    `pool.snapshot(r)` is the pool as it stood after task r.

    Raises:
        ContractViolation: On duplicate task ids or if the backbone changed
    """
    task_ids = [dataset.task_id for dataset in datasets]
    duplicates = sorted({t for t in task_ids if task_ids.count(t) > 1})
    if duplicates:
        raise ContractViolation(f"duplicate task ids: {', '.join(duplicates)}")

    depth = config.depth_for(backbone.config)
    pool = PromptPool(pool_config_hash(backbone.config, depth, config.prompt_length))
    fingerprint = backbone.fingerprint()

    for index, dataset in enumerate(datasets):
        result = train_task(backbone, dataset, config, task_index=index)
        pool.add(
            PoolEntry(
                task_id=result.task_id,
                key=result.key,
                prompts=result.prompts,
                aligner=result.aligner,
                creation_step=index + 1,
                config_hash=pool.config_hash,
            )
        )
        if on_task_done is not None:
            on_task_done(index, result, pool)

    check_frozen(fingerprint, backbone)
    logger.info("Trained %d tasks: %s", len(pool), ", ".join(pool.task_ids))
    return pool
