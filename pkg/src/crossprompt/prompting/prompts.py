"""
Per-task prompt state.

A task owns deep prompts for both encoders and, per prompted layer, a pair
of Aligner matrices that carry prompts across modalities:

    T_hat_l = V_l @ A_v2t(l)^T     (visual prompts into text width)
    V_hat_l = T_l @ A_t2v(l)^T     (text prompts into vision width)

Layer indices are 0-based: layer l is the (l+1)-th transformer block.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..exceptions import ContractViolation
from ..models.config import EncoderConfig, PromptMode
from ..numeric import ops
from ..numeric.rng import Rng
from ..numeric.tensor import Tensor

logger = logging.getLogger(__name__)


class PromptSet(BaseModel):
    """
    Learnable deep prompts T_l (p x d_t) and V_l (p x d_v) for layers 0..D-1.

    `vision` is empty for text-only prompting; otherwise it has the same
    depth and prompt length as `text`.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    text: List[Tensor] = Field(default_factory=list)
    vision: List[Tensor] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_shapes(self) -> "PromptSet":
        lengths = {t.shape[0] for t in self.text} | {v.shape[0] for v in self.vision}
        if len(lengths) > 1:
            raise ValueError(f"text and visual prompt lengths must match, got {sorted(lengths)}")
        if self.vision and len(self.vision) != len(self.text):
            raise ValueError(
                f"visual prompt depth {len(self.vision)} differs from text depth {len(self.text)}"
            )
        for tensor in (*self.text, *self.vision):
            if tensor.ndim != 2:
                raise ValueError(f"prompt tensors must be 2-D, got {tensor.shape}")
            if not tensor.is_finite():
                raise ValueError("prompt tensors must be finite")
        return self

    @property
    def depth(self) -> int:
        return len(self.text)

    @property
    def length(self) -> int:
        return self.text[0].shape[0] if self.text else 0

    def named_tensors(self) -> Dict[str, Tensor]:
        named = {f"prompt.text.{i}": t for i, t in enumerate(self.text)}
        named.update({f"prompt.vision.{i}": v for i, v in enumerate(self.vision)})
        return named

    def replace(self, mapping: Dict[str, Tensor]) -> "PromptSet":
        return PromptSet(
            text=[mapping.get(f"prompt.text.{i}", t) for i, t in enumerate(self.text)],
            vision=[mapping.get(f"prompt.vision.{i}", v) for i, v in enumerate(self.vision)],
        )


class AlignerParams(BaseModel):
    """Per-layer projections A_v2t (d_t x d_v) and A_t2v (d_v x d_t). No bias."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    v2t: List[Tensor] = Field(default_factory=list)
    t2v: List[Tensor] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_shapes(self) -> "AlignerParams":
        if len(self.v2t) != len(self.t2v):
            raise ValueError(f"aligner depths differ: {len(self.v2t)} v2t vs {len(self.t2v)} t2v")
        for a, b in zip(self.v2t, self.t2v):
            if a.ndim != 2 or b.shape != (a.shape[1], a.shape[0]):
                raise ValueError(f"aligner shapes {a.shape} and {b.shape} are not transposed pairs")
            if not (a.is_finite() and b.is_finite()):
                raise ValueError("aligner matrices must be finite")
        return self

    @property
    def depth(self) -> int:
        return len(self.v2t)

    def named_tensors(self) -> Dict[str, Tensor]:
        named = {f"aligner.v2t.{i}": a for i, a in enumerate(self.v2t)}
        named.update({f"aligner.t2v.{i}": a for i, a in enumerate(self.t2v)})
        return named

    def replace(self, mapping: Dict[str, Tensor]) -> "AlignerParams":
        return AlignerParams(
            v2t=[mapping.get(f"aligner.v2t.{i}", a) for i, a in enumerate(self.v2t)],
            t2v=[mapping.get(f"aligner.t2v.{i}", a) for i, a in enumerate(self.t2v)],
        )


def init_prompts(
    config: EncoderConfig,
    depth: int,
    length: int,
    rng: Rng,
    std: float = 0.02,
    mode: PromptMode = PromptMode.CROSS_MODAL,
) -> PromptSet:
    """Prompts drawn from Normal(0, std)."""
    if depth > config.layers:
        raise ContractViolation(f"prompt depth {depth} exceeds {config.layers} layers")
    text_rng, vision_rng = rng.child("text"), rng.child("vision")
    text = [Tensor(text_rng.normal((length, config.text_width), std)) for _ in range(depth)]
    vision = []
    if mode != PromptMode.TEXT_ONLY:
        vision = [
            Tensor(vision_rng.normal((length, config.vision_width), std)) for _ in range(depth)
        ]
    return PromptSet(text=text, vision=vision)


def init_aligner(
    config: EncoderConfig, depth: int, mode: PromptMode = PromptMode.CROSS_MODAL
) -> AlignerParams:
    """Zero Aligners, so a fresh task starts at the direct-prompt-only model."""
    if mode == PromptMode.TEXT_ONLY:
        return AlignerParams()
    dt, dv = config.text_width, config.vision_width
    return AlignerParams(
        v2t=[Tensor.zeros((dt, dv)) for _ in range(depth)],
        t2v=[Tensor.zeros((dv, dt)) for _ in range(depth)],
    )


def _layer_matrix(matrices: List[Tensor], layer: int, label: str) -> Tensor:
    if not 0 <= layer < len(matrices):
        raise ContractViolation(f"layer {layer} outside aligner depth {len(matrices)} ({label})")
    return matrices[layer]


def project_v2t(aligner: AlignerParams, visual: Tensor, layer: int) -> Tensor:
    """Map visual prompts (p, d_v) of one layer into text width (p, d_t)."""
    matrix = _layer_matrix(aligner.v2t, layer, "v2t")
    if visual.ndim != 2 or visual.shape[1] != matrix.shape[1]:
        raise ContractViolation(f"visual prompt {visual.shape} does not fit A_v2t {matrix.shape}")
    return ops.matmul(visual, ops.transpose(matrix))


def project_t2v(aligner: AlignerParams, text: Tensor, layer: int) -> Tensor:
    """Map text prompts (p, d_t) of one layer into vision width (p, d_v)."""
    matrix = _layer_matrix(aligner.t2v, layer, "t2v")
    if text.ndim != 2 or text.shape[1] != matrix.shape[1]:
        raise ContractViolation(f"text prompt {text.shape} does not fit A_t2v {matrix.shape}")
    return ops.matmul(text, ops.transpose(matrix))


def cross_modal_prompts(
    prompts: PromptSet, aligner: AlignerParams
) -> Tuple[Optional[List[Tensor]], List[Tensor], Optional[List[Tensor]]]:
    """
    Project prompts across modalities for every prompted layer.

    Returns (text injections, visual prompts, visual injections). Injections
    are None when there is nothing to project (text-only prompting).
    """
    if not prompts.vision or aligner.depth == 0:
        return None, list(prompts.vision), None
    if aligner.depth != prompts.depth:
        raise ContractViolation(
            f"aligner depth {aligner.depth} differs from prompt depth {prompts.depth}"
        )
    text_injected = [project_v2t(aligner, v, i) for i, v in enumerate(prompts.vision)]
    vision_injected = [project_t2v(aligner, t, i) for i, t in enumerate(prompts.text)]
    return text_injected, list(prompts.vision), vision_injected


def trainable_tensors(
    prompts: PromptSet, aligner: AlignerParams, mode: PromptMode
) -> Dict[str, Tensor]:
    """The tensors a task actually optimizes under `mode`."""
    named = {f"prompt.text.{i}": t for i, t in enumerate(prompts.text)}
    if mode != PromptMode.TEXT_ONLY:
        named.update({f"prompt.vision.{i}": v for i, v in enumerate(prompts.vision)})
    if mode == PromptMode.CROSS_MODAL:
        named.update(aligner.named_tensors())
    return named


def count_trainable(
    config: EncoderConfig,
    depth: int,
    length: int,
    per_layer_aligner: bool = True,
    mode: PromptMode = PromptMode.CROSS_MODAL,
) -> int:
    """
    Closed-form trainable parameter count of one task.

    cross_modal: D*p*d_t + D*p*d_v + (D or 1) * 2 * d_t * d_v
    """
    dt, dv = config.text_width, config.vision_width
    if depth == 0:
        return 0
    count = depth * length * dt
    if mode == PromptMode.TEXT_ONLY:
        return count
    count += depth * length * dv
    if mode == PromptMode.CROSS_MODAL:
        count += (depth if per_layer_aligner else 1) * 2 * dt * dv
    return count


def enumerate_trainable(prompts: PromptSet, aligner: AlignerParams, mode: PromptMode) -> int:
    """Parameter count from the registered tensors themselves."""
    return int(np.sum([t.size for t in trainable_tensors(prompts, aligner, mode).values()]))
