"""
Value-pathway injection of cross-modal prompts.

A prompted layer sees its token stream followed by the layer's direct
prompts. Queries and keys at prompt positions come from the direct prompts
alone; values at prompt positions come from direct + projected prompts.
Attention weights therefore never depend on the projected prompts.
"""

from typing import Optional, Tuple

from ..exceptions import ContractViolation
from ..numeric import ops
from ..numeric.tensor import Tensor


def inject_values(
    tokens: Tensor,
    direct: Tensor,
    injected: Optional[Tensor] = None,
) -> Tuple[Tensor, Optional[Tensor]]:
    """
    Build the attention inputs of a prompted layer.

    Args:
        tokens: (B, n, d) token stream entering the layer
        direct: (p, d) learnable prompts of this layer
        injected: (p, d) cross-modal prompts projected from the other encoder

    Returns:
        (query/key stream, value stream), each (B, n + p, d). The value
        stream is None when nothing is injected, meaning "same as the
        query/key stream".
    """
    if tokens.ndim != 3 or direct.ndim != 2 or direct.shape[1] != tokens.shape[2]:
        raise ContractViolation(
            f"prompt shape {direct.shape} does not fit token stream {tokens.shape}"
        )
    batch = tokens.shape[0]
    prompts = ops.broadcast_to(ops.reshape(direct, (1, *direct.shape)), (batch, *direct.shape))
    stream = ops.concat([tokens, prompts], axis=1)
    if injected is None:
        return stream, None
    if injected.shape != direct.shape:
        raise ContractViolation(
            f"injected prompt shape {injected.shape} must equal direct prompt shape {direct.shape}"
        )
    combined = ops.add(direct, injected)
    combined = ops.broadcast_to(
        ops.reshape(combined, (1, *combined.shape)), (batch, *combined.shape)
    )
    return stream, ops.concat([tokens, combined], axis=1)
