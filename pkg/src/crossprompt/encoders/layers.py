"""Transformer building blocks shared by both encoders."""

import math
from typing import List, Optional, Sequence

from ..exceptions import ContractViolation
from ..numeric import ops
from ..numeric.tensor import Tensor
from ..prompting.injection import inject_values
from .backbone import BlockWeights

MASKED = -1e30


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = ops.matmul(x, weight)
    return out if bias is None else ops.add(out, bias)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    batch, length, width = x.shape
    x = ops.reshape(x, (batch, length, heads, width // heads))
    return ops.transpose(x, (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    batch, heads, length, head_width = x.shape
    x = ops.transpose(x, (0, 2, 1, 3))
    return ops.reshape(x, (batch, length, heads * head_width))


def self_attention(
    h: Tensor,
    block: BlockWeights,
    heads: int,
    value_input: Optional[Tensor] = None,
    mask: Optional[Tensor] = None,
    attention_log: Optional[List[Tensor]] = None,
) -> Tensor:
    """
    Multi-head self-attention over (B, n, d).

    Queries and keys are computed from `h`; values from `value_input` when
    given (same shape as `h`), otherwise from `h`. `mask` is an additive
    (B, 1, 1, n) tensor; `attention_log` receives the (B, heads, n, n) weights.
    """
    source = h if value_input is None else value_input
    q = _split_heads(linear(h, block.query_weight, block.query_bias), heads)
    k = _split_heads(linear(h, block.key_weight, block.key_bias), heads)
    v = _split_heads(linear(source, block.value_weight, block.value_bias), heads)

    head_width = h.shape[-1] // heads
    scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_width))
    if mask is not None:
        scores = ops.add(scores, mask)
    weights = ops.softmax(scores, axis=-1)
    if attention_log is not None:
        attention_log.append(weights)
    context = _merge_heads(ops.matmul(weights, v))
    return linear(context, block.out_weight, block.out_bias)


def mlp(x: Tensor, block: BlockWeights) -> Tensor:
    hidden = ops.gelu(linear(x, block.fc_weight, block.fc_bias))
    return linear(hidden, block.proj_weight, block.proj_bias)


def transformer_block(
    x: Tensor,
    block: BlockWeights,
    heads: int,
    value_input: Optional[Tensor] = None,
    mask: Optional[Tensor] = None,
    attention_log: Optional[List[Tensor]] = None,
) -> Tensor:
    """Pre-LayerNorm block: x + attn(LN(x)), then + mlp(LN(.))."""
    h = ops.layer_norm(x, block.ln1_gain, block.ln1_bias)
    hv = None
    if value_input is not None:
        hv = ops.layer_norm(value_input, block.ln1_gain, block.ln1_bias)
    attended = self_attention(
        h, block, heads, value_input=hv, mask=mask, attention_log=attention_log
    )
    x = ops.add(x, attended)
    return ops.add(x, mlp(ops.layer_norm(x, block.ln2_gain, block.ln2_bias), block))


def run_stack(
    x: Tensor,
    blocks: Sequence[BlockWeights],
    heads: int,
    prompts: Sequence[Tensor] = (),
    injected: Optional[Sequence[Tensor]] = None,
    plain_mask: Optional[Tensor] = None,
    prompted_mask: Optional[Tensor] = None,
    attention_log: Optional[List[Tensor]] = None,
) -> Tensor:
    """
    Run every block, with deep prompts in the first len(prompts) layers.

    At a prompted layer the stream is [tokens, prompts]; outputs at prompt
    positions are dropped afterwards, so the next layer gets fresh prompts
    (or none) and the token count stays fixed.
    """
    if len(prompts) > len(blocks):
        raise ContractViolation(f"{len(prompts)} prompt layers for a {len(blocks)}-layer encoder")
    if injected is not None and len(injected) != len(prompts):
        raise ContractViolation(
            f"{len(injected)} injected prompt layers for {len(prompts)} direct prompt layers"
        )
    length = x.shape[1]
    for index, block in enumerate(blocks):
        if index < len(prompts):
            stream, values = inject_values(
                x, prompts[index], None if injected is None else injected[index]
            )
            out = transformer_block(
                stream,
                block,
                heads,
                value_input=values,
                mask=prompted_mask,
                attention_log=attention_log,
            )
            x = ops.slice_axis(out, 1, 0, length)
        else:
            x = transformer_block(x, block, heads, mask=plain_mask, attention_log=attention_log)
    return x
