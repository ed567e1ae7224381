"""
Text encoder.

Token embedding + positional embedding, L pre-LN blocks with optional deep
prompts, final LayerNorm, readout at each sequence's last real token and
projection into the joint space. Sequences in a batch are right-padded;
pad positions are masked out as attention keys.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ContractViolation
from ..models.config import EncoderConfig, TokenSeq
from ..numeric import ops
from ..numeric.tensor import Tensor
from .backbone import BackboneWeights
from .layers import MASKED, run_stack

PAD_TOKEN = 0


def token_batch(
    config: EncoderConfig, sequences: Sequence[TokenSeq]
) -> Tuple[np.ndarray, np.ndarray]:
    """Right-padded id matrix (B, n) and real lengths (B,)."""
    if not sequences:
        raise ContractViolation("at least one token sequence is required")
    lengths = np.array([len(seq) for seq in sequences], dtype=np.int64)
    if lengths.min() < 1:
        raise ContractViolation("token sequences must not be empty")
    if lengths.max() > config.max_text_tokens:
        raise ContractViolation(
            f"token sequence of length {lengths.max()} exceeds max_text_tokens "
            f"{config.max_text_tokens}"
        )
    ids = np.full((len(sequences), int(lengths.max())), PAD_TOKEN, dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = seq
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ContractViolation(f"token ids must lie in [0, {config.vocab_size})")
    return ids, lengths


def _padding_mask(lengths: np.ndarray, width: int, extra: int) -> Optional[Tensor]:
    """Additive key mask (B, 1, 1, width + extra); None when nothing is padded."""
    if np.all(lengths == width):
        return None
    positions = np.arange(width + extra)
    masked = (positions[None, :] >= lengths[:, None]) & (positions[None, :] < width)
    mask = np.where(masked, MASKED, 0.0)
    return ops.constant(mask[:, None, None, :])


def text_encode(
    weights: BackboneWeights,
    sequences: Sequence[TokenSeq],
    prompts: Sequence[Tensor] = (),
    injected: Optional[Sequence[Tensor]] = None,
    attention_log: Optional[List[Tensor]] = None,
) -> Tensor:
    """
    Encode a batch of token sequences into (B, joint_width) features.

    Args:
        weights: frozen backbone
        sequences: token id sequences, each 1..max_text_tokens long
        prompts: per-layer direct text prompts (p, d_t) for layers 0..D-1
        injected: per-layer projected visual prompts, same shapes as prompts
        attention_log: optional list collecting attention weights
    """
    config = weights.config
    tw = weights.text
    ids, lengths = token_batch(config, sequences)
    width = ids.shape[1]
    extra = prompts[0].shape[0] if prompts else 0

    x = ops.add(
        ops.take_rows(tw.token_embedding, ids),
        ops.slice_axis(tw.positional_embedding, 0, 0, width),
    )
    x = run_stack(
        x,
        tw.blocks,
        config.heads,
        prompts=prompts,
        injected=injected,
        plain_mask=_padding_mask(lengths, width, 0),
        prompted_mask=_padding_mask(lengths, width, extra),
        attention_log=attention_log,
    )
    x = ops.layer_norm(x, tw.final_gain, tw.final_bias)
    features = ops.gather_positions(x, lengths - 1)
    return ops.matmul(features, tw.projection)


def base_text_encode(weights: BackboneWeights, sequences: Sequence[TokenSeq]) -> Tensor:
    """Prompt-free text features (zero-shot path and prototype extraction)."""
    return text_encode(weights, sequences)
