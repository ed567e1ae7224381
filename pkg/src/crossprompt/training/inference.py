"""
Retrieval-routed inference.

The query prototype comes from the candidate class names. If the pool has
a key at least `threshold` similar, the matching entry's prompts are used;
otherwise the prompt-free backbone predicts (zero-shot path).
"""

import logging
from typing import Optional, Sequence

import numpy as np

from ..encoders.backbone import BackboneWeights
from ..encoders.text import base_text_encode
from ..encoders.vision import base_image_encode
from ..exceptions import ContractViolation
from ..models.config import TokenSeq
from ..numeric import ops
from ..numeric.tensor import no_tape
from ..pool.pool import Fallback, PoolEntry, PromptPool
from ..pool.prototype import Prototype, extract_prototype, with_template
from .objective import prompted_features, scores

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256


def _chunks(images: np.ndarray):
    for start in range(0, images.shape[0], CHUNK_SIZE):
        yield images[start : start + CHUNK_SIZE]


def _as_batch(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    return images[None] if images.ndim == 3 else images


def base_predictions(
    backbone: BackboneWeights,
    images: np.ndarray,
    class_names: Sequence[TokenSeq],
    template: TokenSeq = (),
) -> np.ndarray:
    """argmax cosine between prompt-free image and class features."""
    images = _as_batch(images)
    predictions = []
    with no_tape():
        y = base_text_encode(backbone, with_template(class_names, template))
        for chunk in _chunks(images):
            s = scores(base_image_encode(backbone, chunk), y)
            predictions.append(np.argmax(s.data, axis=-1))
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def prompted_predictions(
    backbone: BackboneWeights,
    entry: PoolEntry,
    images: np.ndarray,
    class_names: Sequence[TokenSeq],
    tau: float,
    template: TokenSeq = (),
) -> np.ndarray:
    """argmax softmax(similarity / tau) with one entry's prompts applied."""
    images = _as_batch(images)
    names = with_template(class_names, template)
    predictions = []
    with no_tape():
        for chunk in _chunks(images):
            x, y = prompted_features(backbone, entry.prompts, entry.aligner, chunk, names)
            probs = ops.softmax(scores(x, y), tau=tau)
            predictions.append(np.argmax(probs.data, axis=-1))
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def route(
    pool: PromptPool,
    backbone: BackboneWeights,
    class_names: Sequence[TokenSeq],
    threshold: float,
    template: TokenSeq = (),
    query: Optional[Prototype] = None,
) -> Optional[PoolEntry]:
    """The pool entry serving these classes, or None for the zero-shot path."""
    if query is None:
        query = extract_prototype(backbone, class_names, template)
    result = pool.query(query, threshold)
    if isinstance(result, Fallback):
        logger.debug(
            "Routing to zero-shot path (%s, best %s)", result.reason, result.best_similarity
        )
        return None
    logger.debug("Routing to entry %s (similarity %.6f)", result.entry.task_id, result.similarity)
    return result.entry


def infer_batch(
    pool: PromptPool,
    backbone: BackboneWeights,
    images: np.ndarray,
    class_names: Sequence[TokenSeq],
    threshold: float,
    tau: float,
    template: TokenSeq = (),
) -> np.ndarray:
    """
    Predicted class indices for a batch of images sharing one class list.

    The query prototype depends only on the class names, so it is computed
    once and every image takes the same route.
    """
    if not class_names:
        raise ContractViolation("infer needs at least one candidate class")
    entry = route(pool, backbone, class_names, threshold, template)
    if entry is None:
        return base_predictions(backbone, images, class_names, template)
    return prompted_predictions(backbone, entry, images, class_names, tau, template)


def infer(
    pool: PromptPool,
    backbone: BackboneWeights,
    image: np.ndarray,
    class_names: Sequence[TokenSeq],
    threshold: float,
    tau: float,
    template: TokenSeq = (),
) -> int:
    """Predicted class index of a single (H, W, C) image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ContractViolation(f"infer expects one (H, W, C) image, got {image.shape}")
    return int(infer_batch(pool, backbone, image, class_names, threshold, tau, template)[0])
