"""Task prototypes and the prompt pool."""

from .pool import (
    Fallback,
    PoolEntry,
    PoolMatch,
    PromptPool,
    QueryResult,
    cosine_similarity,
    pool_add,
    pool_query,
)
from .prototype import Prototype, extract_prototype, prototype_from_embeddings, with_template
from .storage import decode_pool, encode_pool, load_pool, pool_load, pool_save, save_pool

__all__ = [
    "Fallback",
    "PoolEntry",
    "PoolMatch",
    "PromptPool",
    "QueryResult",
    "cosine_similarity",
    "pool_add",
    "pool_query",
    "Prototype",
    "extract_prototype",
    "prototype_from_embeddings",
    "with_template",
    "encode_pool",
    "decode_pool",
    "save_pool",
    "load_pool",
    "pool_save",
    "pool_load",
]
