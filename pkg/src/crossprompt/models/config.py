"""
Configuration models.

Plain pydantic models for the encoder shape, prompt tuning, backbone
pretraining and the synthetic benchmark. The CLI's RunConfig flattens all
of them into one settings object.
"""

import hashlib
import json
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TokenSeq = Tuple[int, ...]


class PromptMode(str, Enum):
    """Which prompt tensors a task trains."""

    CROSS_MODAL = "cross_modal"  # text + visual prompts + aligners
    INDEPENDENT = "independent"  # text + visual prompts, aligners held at zero
    TEXT_ONLY = "text_only"  # text prompts only


class TransferMode(str, Enum):
    """How not-yet-trained tasks are evaluated."""

    THRESHOLD = "threshold"  # route through the pool with the threshold
    FORCED_FALLBACK = "forced_fallback"  # always use the base model for r < c


class EncoderConfig(BaseModel):
    """Shape of the dual-encoder backbone."""

    model_config = ConfigDict(frozen=True)

    layers: int = Field(default=4, gt=0, description="Transformer layers per encoder (L)")
    text_width: int = Field(default=64, gt=0, description="Text width d_t")
    vision_width: int = Field(default=64, gt=0, description="Vision width d_v")
    heads: int = Field(default=4, gt=0)
    max_text_tokens: int = Field(default=8, gt=0, description="N_t")
    patch_size: int = Field(default=4, gt=0)
    image_size: int = Field(default=16, gt=0)
    channels: int = Field(default=3, gt=0)
    vocab_size: int = Field(default=64, gt=0)
    joint_width: int = Field(default=32, gt=0, description="Shared embedding width")
    mlp_ratio: int = Field(default=4, gt=0)

    @model_validator(mode="after")
    def check_divisibility(self) -> "EncoderConfig":
        if self.text_width % self.heads or self.vision_width % self.heads:
            raise ValueError(
                f"text_width {self.text_width} and vision_width {self.vision_width} "
                f"must be divisible by heads {self.heads}"
            )
        if self.image_size % self.patch_size:
            raise ValueError(
                f"image_size {self.image_size} must be a multiple of patch_size {self.patch_size}"
            )
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        """N_b."""
        return self.grid * self.grid

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    def header_fields(self) -> Tuple[int, ...]:
        """Fields written to the checkpoint header, in order."""
        return tuple(getattr(self, name) for name in type(self).model_fields)

    @classmethod
    def from_header_fields(cls, values: Tuple[int, ...]) -> "EncoderConfig":
        return cls(**dict(zip(cls.model_fields, values)))

    @classmethod
    def mini(cls) -> "EncoderConfig":
        return cls()

    @classmethod
    def vit_b16_shaped(cls) -> "EncoderConfig":
        """ViT-B/16-sized widths; only used for parameter accounting."""
        return cls(
            layers=12,
            text_width=512,
            vision_width=768,
            heads=8,
            max_text_tokens=77,
            patch_size=16,
            image_size=224,
            vocab_size=49408,
            joint_width=512,
        )


class TrainConfig(BaseModel):
    """Per-task prompt tuning settings."""

    iterations: int = Field(default=2000, ge=0, description="Optimizer steps per task")
    few_shot_iterations: int = Field(default=500, ge=0)
    few_shot: bool = False
    shots: int = Field(default=5, gt=0, description="Examples per class in few-shot mode")
    learning_rate: float = Field(default=2e-3, gt=0.0)
    batch_size: int = Field(default=64, gt=0)
    temperature: float = Field(default=0.01, gt=0.0, description="Softmax temperature tau")
    weight_decay: float = Field(default=0.0, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    prompt_depth: Optional[int] = Field(default=None, ge=0, description="None means every layer")
    prompt_length: int = Field(default=2, gt=0)
    prompt_mode: PromptMode = PromptMode.CROSS_MODAL
    prompt_init_std: float = Field(default=0.02, gt=0.0)
    threshold: float = Field(default=0.8, description="Pool discrimination threshold gamma")
    transfer_mode: TransferMode = TransferMode.THRESHOLD
    class_template: TokenSeq = Field(default=(), description="Tokens prepended to class names")
    seed: int = 0
    eval_workers: int = Field(default=1, gt=0)
    log_every: int = Field(default=100, gt=0)

    @field_validator("threshold")
    @classmethod
    def validate_threshold(cls, v: float) -> float:
        if v != v:
            raise ValueError("threshold must not be NaN")
        return v

    @property
    def effective_iterations(self) -> int:
        return self.few_shot_iterations if self.few_shot else self.iterations

    def depth_for(self, encoder: EncoderConfig) -> int:
        depth = encoder.layers if self.prompt_depth is None else self.prompt_depth
        if depth > encoder.layers:
            raise ValueError(f"prompt_depth {depth} exceeds encoder layers {encoder.layers}")
        return depth


class PretrainConfig(BaseModel):
    """Contrastive pretraining of the stand-in backbone."""

    max_iterations: int = Field(default=5000, ge=0)
    batch_size: int = Field(default=64, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    temperature: float = Field(default=0.07, gt=0.0)
    target_accuracy: float = Field(default=0.85, ge=0.0, le=1.0)
    eval_every: int = Field(default=250, gt=0)
    init_std: float = Field(default=0.02, gt=0.0)
    seed: int = 0


class BenchmarkConfig(BaseModel):
    """Synthetic multi-domain benchmark parameters."""

    n_domains: int = Field(default=3, gt=0)
    n_classes: int = Field(default=5, gt=1)
    samples_per_class: int = Field(default=40, gt=1)
    test_fraction: float = Field(default=0.25, gt=0.0, lt=1.0)
    noise_std: float = Field(default=0.05, ge=0.0)
    min_margin: float = Field(default=0.1, ge=0.0)
    max_rerolls: int = Field(default=8, ge=0)
    seed: int = 0


def canonical_hash(payload: Dict[str, Any]) -> str:
    """sha256 hex digest of sorted, compact JSON."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def pool_config_hash(encoder: EncoderConfig, depth: int, length: int) -> str:
    """Identity of the tensor shapes stored in a prompt pool."""
    return canonical_hash(
        {"encoder": encoder.model_dump(), "prompt_depth": depth, "prompt_length": length}
    )
