"""
Vision encoder.

Non-overlapping patches are flattened in (row, column, channel) order,
linearly projected, prefixed with the class token and offset by positional
embeddings. Readout is the class-token output after the final LayerNorm.
"""

from typing import List, Optional, Sequence, Union

import numpy as np

from ..exceptions import ContractViolation
from ..models.config import EncoderConfig
from ..numeric import ops
from ..numeric.tensor import Tensor
from .backbone import BackboneWeights
from .layers import run_stack

ImageInput = Union[np.ndarray, Tensor]


def _as_batch(config: EncoderConfig, images: ImageInput) -> np.ndarray:
    array = images.data if isinstance(images, Tensor) else np.asarray(images, dtype=np.float64)
    expected = (config.image_size, config.image_size, config.channels)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4 or array.shape[1:] != expected:
        raise ContractViolation(f"images must be (B, {expected}) or {expected}, got {array.shape}")
    return array


def patchify(config: EncoderConfig, images: ImageInput) -> np.ndarray:
    """(B, H, W, C) -> (B, N_b, patch_size * patch_size * C)."""
    batch = _as_batch(config, images)
    b, g, p, c = batch.shape[0], config.grid, config.patch_size, config.channels
    patches = batch.reshape(b, g, p, g, p, c).transpose(0, 1, 3, 2, 4, 5)
    return np.ascontiguousarray(patches.reshape(b, g * g, p * p * c))


def embed_patches(weights: BackboneWeights, images: ImageInput) -> Tensor:
    """
    Patch embeddings with the class token first.

    A single (H, W, C) image gives (N_b + 1, d_v); a batch gives
    (B, N_b + 1, d_v).
    """
    config = weights.config
    vw = weights.vision
    single = (images.ndim if isinstance(images, Tensor) else np.ndim(images)) == 3
    patches = ops.constant(patchify(config, images))
    batch = patches.shape[0]
    width = config.vision_width

    tokens = ops.add(ops.matmul(patches, vw.patch_weight), vw.patch_bias)
    cls = ops.broadcast_to(ops.reshape(vw.class_embedding, (1, 1, width)), (batch, 1, width))
    x = ops.add(ops.concat([cls, tokens], axis=1), vw.positional_embedding)
    if single:
        return ops.reshape(x, x.shape[1:])
    return x


def image_encode(
    weights: BackboneWeights,
    images: ImageInput,
    prompts: Sequence[Tensor] = (),
    injected: Optional[Sequence[Tensor]] = None,
    attention_log: Optional[List[Tensor]] = None,
) -> Tensor:
    """Encode (B, H, W, C) images (or one (H, W, C) image) into (B, joint_width) features."""
    config = weights.config
    vw = weights.vision
    x = embed_patches(weights, _as_batch(config, images))
    x = run_stack(
        x, vw.blocks, config.heads, prompts=prompts, injected=injected, attention_log=attention_log
    )
    x = ops.layer_norm(x, vw.final_gain, vw.final_bias)
    cls = ops.reshape(ops.slice_axis(x, 1, 0, 1), (x.shape[0], config.vision_width))
    return ops.matmul(cls, vw.projection)


def base_image_encode(weights: BackboneWeights, images: ImageInput) -> Tensor:
    """Prompt-free image features."""
    return image_encode(weights, images)
