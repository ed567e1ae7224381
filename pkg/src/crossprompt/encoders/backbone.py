"""
Backbone weights of the dual encoder and their checkpoint format.

Checkpoint layout (little-endian):
    magic "CPBB" | version u32 | EncoderConfig fields as u32 |
    every weight tensor in declaration order (rank u32, dims u32, float64 data)
"""

import hashlib
import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..exceptions import CheckpointFormatError, ContractViolation
from ..models.config import EncoderConfig
from ..numeric.rng import Rng
from ..numeric.tensor import Tensor
from ..serialization import BinaryReader, BinaryWriter, atomic_write

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CPBB"
CHECKPOINT_VERSION = 1


class _WeightTree(BaseModel):
    """Pydantic model whose Tensor leaves can be enumerated and replaced by path."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def iter_tensors(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for field_name in type(self).model_fields:
            value = getattr(self, field_name)
            path = f"{prefix}{field_name}"
            if isinstance(value, Tensor):
                yield path, value
            elif isinstance(value, _WeightTree):
                yield from value.iter_tensors(f"{path}.")
            elif isinstance(value, list):
                for index, item in enumerate(value):
                    yield from item.iter_tensors(f"{path}.{index}.")

    def replace_tensors(self, mapping: Dict[str, Tensor], prefix: str = ""):
        update = {}
        for field_name in type(self).model_fields:
            value = getattr(self, field_name)
            path = f"{prefix}{field_name}"
            if isinstance(value, Tensor):
                if path in mapping:
                    update[field_name] = mapping[path]
            elif isinstance(value, _WeightTree):
                update[field_name] = value.replace_tensors(mapping, f"{path}.")
            elif isinstance(value, list):
                update[field_name] = [
                    item.replace_tensors(mapping, f"{path}.{index}.")
                    for index, item in enumerate(value)
                ]
        return self.model_copy(update=update)


class BlockWeights(_WeightTree):
    """One pre-LayerNorm transformer block."""

    ln1_gain: Tensor
    ln1_bias: Tensor
    query_weight: Tensor
    query_bias: Tensor
    key_weight: Tensor
    key_bias: Tensor
    value_weight: Tensor
    value_bias: Tensor
    out_weight: Tensor
    out_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    fc_weight: Tensor
    fc_bias: Tensor
    proj_weight: Tensor
    proj_bias: Tensor


class TextWeights(_WeightTree):
    token_embedding: Tensor
    positional_embedding: Tensor
    blocks: List[BlockWeights]
    final_gain: Tensor
    final_bias: Tensor
    projection: Tensor


class VisionWeights(_WeightTree):
    patch_weight: Tensor
    patch_bias: Tensor
    class_embedding: Tensor
    positional_embedding: Tensor
    blocks: List[BlockWeights]
    final_gain: Tensor
    final_bias: Tensor
    projection: Tensor


class BackboneWeights(_WeightTree):
    """
    All frozen weights of the dual encoder.

    Tensors are immutable, so a BackboneWeights value can be shared freely;
    pretraining produces new instances via replace_tensors.
    """

    config: EncoderConfig
    text: TextWeights
    vision: VisionWeights

    def named_tensors(self) -> List[Tuple[str, Tensor]]:
        """Every weight tensor in declaration order."""
        return list(self.iter_tensors())

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in self.iter_tensors():
            digest.update(name.encode("utf-8"))
            digest.update(tensor.tobytes())
        return digest.hexdigest()

    def parameter_count(self) -> int:
        return sum(tensor.size for _, tensor in self.iter_tensors())


def _block(width: int, mlp_ratio: int, rng: Rng, std: float) -> BlockWeights:
    hidden = width * mlp_ratio

    def normal(*shape):
        return Tensor(rng.normal(shape, std))

    return BlockWeights(
        ln1_gain=Tensor(np.ones(width)),
        ln1_bias=Tensor.zeros((width,)),
        query_weight=normal(width, width),
        query_bias=Tensor.zeros((width,)),
        key_weight=normal(width, width),
        key_bias=Tensor.zeros((width,)),
        value_weight=normal(width, width),
        value_bias=Tensor.zeros((width,)),
        out_weight=normal(width, width),
        out_bias=Tensor.zeros((width,)),
        ln2_gain=Tensor(np.ones(width)),
        ln2_bias=Tensor.zeros((width,)),
        fc_weight=normal(width, hidden),
        fc_bias=Tensor.zeros((hidden,)),
        proj_weight=normal(hidden, width),
        proj_bias=Tensor.zeros((width,)),
    )


def init_backbone(config: EncoderConfig, rng: Rng, std: float = 0.02) -> BackboneWeights:
    """Random backbone: Normal(0, std) matrices, unit LayerNorm gains, zero biases."""
    text_rng = rng.child("text")
    vision_rng = rng.child("vision")
    dt, dv = config.text_width, config.vision_width

    text = TextWeights(
        token_embedding=Tensor(text_rng.normal((config.vocab_size, dt), std)),
        positional_embedding=Tensor(text_rng.normal((config.max_text_tokens, dt), std)),
        blocks=[
            _block(dt, config.mlp_ratio, text_rng.child("block", i), std)
            for i in range(config.layers)
        ],
        final_gain=Tensor(np.ones(dt)),
        final_bias=Tensor.zeros((dt,)),
        projection=Tensor(text_rng.normal((dt, config.joint_width), dt**-0.5)),
    )
    vision = VisionWeights(
        patch_weight=Tensor(vision_rng.normal((config.patch_dim, dv), std)),
        patch_bias=Tensor.zeros((dv,)),
        class_embedding=Tensor(vision_rng.normal((dv,), std)),
        positional_embedding=Tensor(vision_rng.normal((config.num_patches + 1, dv), std)),
        blocks=[
            _block(dv, config.mlp_ratio, vision_rng.child("block", i), std)
            for i in range(config.layers)
        ],
        final_gain=Tensor(np.ones(dv)),
        final_bias=Tensor.zeros((dv,)),
        projection=Tensor(vision_rng.normal((dv, config.joint_width), dv**-0.5)),
    )
    weights = BackboneWeights(config=config, text=text, vision=vision)
    logger.debug("Initialized backbone with %d parameters", weights.parameter_count())
    return weights


Shape = Tuple[int, ...]
_Layout = List[Tuple[str, Shape]]


def _block_layout(width: int, hidden: int) -> _Layout:
    return [
        ("ln1_gain", (width,)),
        ("ln1_bias", (width,)),
        ("query_weight", (width, width)),
        ("query_bias", (width,)),
        ("key_weight", (width, width)),
        ("key_bias", (width,)),
        ("value_weight", (width, width)),
        ("value_bias", (width,)),
        ("out_weight", (width, width)),
        ("out_bias", (width,)),
        ("ln2_gain", (width,)),
        ("ln2_bias", (width,)),
        ("fc_weight", (width, hidden)),
        ("fc_bias", (hidden,)),
        ("proj_weight", (hidden, width)),
        ("proj_bias", (width,)),
    ]


def _tower_layouts(config: EncoderConfig) -> Dict[str, Tuple[_Layout, _Layout, _Layout]]:
    """Per tower: tensors before the blocks, one block, tensors after the blocks."""
    dt, dv = config.text_width, config.vision_width
    return {
        "text": (
            [
                ("token_embedding", (config.vocab_size, dt)),
                ("positional_embedding", (config.max_text_tokens, dt)),
            ],
            _block_layout(dt, dt * config.mlp_ratio),
            [
                ("final_gain", (dt,)),
                ("final_bias", (dt,)),
                ("projection", (dt, config.joint_width)),
            ],
        ),
        "vision": (
            [
                ("patch_weight", (config.patch_dim, dv)),
                ("patch_bias", (dv,)),
                ("class_embedding", (dv,)),
                ("positional_embedding", (config.num_patches + 1, dv)),
            ],
            _block_layout(dv, dv * config.mlp_ratio),
            [
                ("final_gain", (dv,)),
                ("final_bias", (dv,)),
                ("projection", (dv, config.joint_width)),
            ],
        ),
    }


def _record_bytes(layout: _Layout) -> int:
    return sum(4 + 4 * len(shape) + 8 * math.prod(shape) for _, shape in layout)


def checkpoint_size(config: EncoderConfig) -> int:
    """Exact byte length of a checkpoint for `config`, computed without allocating weights."""
    size = len(CHECKPOINT_MAGIC) + 4 + 4 * len(EncoderConfig.model_fields)
    for head, block, tail in _tower_layouts(config).values():
        size += _record_bytes(head) + config.layers * _record_bytes(block) + _record_bytes(tail)
    return size


def backbone_shapes(config: EncoderConfig) -> Iterator[Tuple[str, Shape]]:
    """(name, shape) of every weight tensor, in the order named_tensors() yields them."""
    for tower, (head, block, tail) in _tower_layouts(config).items():
        for name, shape in head:
            yield f"{tower}.{name}", shape
        for index in range(config.layers):
            for name, shape in block:
                yield f"{tower}.blocks.{index}.{name}", shape
        for name, shape in tail:
            yield f"{tower}.{name}", shape


def _assemble(config: EncoderConfig, mapping: Dict[str, Tensor]) -> BackboneWeights:
    towers = {}
    for tower, (head, block, tail) in _tower_layouts(config).items():
        fields = {name: mapping[f"{tower}.{name}"] for name, _ in head + tail}
        fields["blocks"] = [
            BlockWeights(**{name: mapping[f"{tower}.blocks.{i}.{name}"] for name, _ in block})
            for i in range(config.layers)
        ]
        towers[tower] = fields
    return BackboneWeights(
        config=config, text=TextWeights(**towers["text"]), vision=VisionWeights(**towers["vision"])
    )


def encode_backbone(weights: BackboneWeights) -> bytes:
    writer = BinaryWriter()
    writer.raw(CHECKPOINT_MAGIC)
    writer.u32(CHECKPOINT_VERSION)
    for value in weights.config.header_fields():
        writer.u32(value)
    for _, tensor in weights.named_tensors():
        writer.tensor(tensor)
    return writer.getvalue()


def decode_backbone(data: bytes) -> BackboneWeights:
    reader = BinaryReader(data, CheckpointFormatError)
    if reader.raw(4) != CHECKPOINT_MAGIC:
        reader.fail("bad magic, expected CPBB", 0)
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        reader.fail(f"unsupported checkpoint version {version}", 4)

    header_offset = reader.offset
    values = tuple(reader.u32() for _ in EncoderConfig.model_fields)
    try:
        config = EncoderConfig.from_header_fields(values)
    except ValueError as e:
        reader.fail(f"invalid encoder config in header: {e}", header_offset)

    expected_size = checkpoint_size(config)
    if expected_size != len(data):
        reader.fail(
            f"header describes a {expected_size}-byte checkpoint, file has {len(data)} bytes",
            header_offset,
        )

    mapping: Dict[str, Tensor] = {}
    for name, shape in backbone_shapes(config):
        start = reader.offset
        tensor = reader.tensor()
        if tensor.shape != shape:
            reader.fail(f"tensor {name} has shape {tensor.shape}, expected {shape}", start)
        mapping[name] = tensor
    reader.expect_end()
    return _assemble(config, mapping)


def save_backbone(weights: BackboneWeights, path: Path) -> None:
    atomic_write(Path(path), encode_backbone(weights))
    logger.info("Saved backbone checkpoint to %s", path)


def load_backbone(path: Path) -> BackboneWeights:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Backbone checkpoint not found: {path}")
    weights = decode_backbone(path.read_bytes())
    logger.info("Loaded backbone checkpoint from %s", path)
    return weights


def check_frozen(before: str, after: BackboneWeights) -> None:
    """Raise if the backbone changed since `before` (a fingerprint)."""
    if after.fingerprint() != before:
        raise ContractViolation("backbone weights changed during continual learning")
