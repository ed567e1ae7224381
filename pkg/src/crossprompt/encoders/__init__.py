"""
Frozen dual-encoder backbone with deep prompt injection.
"""

from .backbone import (
    BackboneWeights,
    BlockWeights,
    check_frozen,
    init_backbone,
    load_backbone,
    save_backbone,
)
from .text import base_text_encode, text_encode, token_batch
from .vision import base_image_encode, embed_patches, image_encode, patchify

__all__ = [
    "BackboneWeights",
    "BlockWeights",
    "init_backbone",
    "load_backbone",
    "save_backbone",
    "check_frozen",
    "text_encode",
    "base_text_encode",
    "token_batch",
    "image_encode",
    "base_image_encode",
    "embed_patches",
    "patchify",
]
