"""
Prompt pool file format (little-endian):

    magic "CPP1" | version u32 | config hash (32 raw bytes) | entry count u32
    per entry:
        task_id (u16 length + UTF-8) | creation_step u32 | key tensor
        text prompts, visual prompts, A_v2t, A_t2v  (each: u32 count + tensors)

Tensors are rank u32, dims u32, then the float64 payload. Loading parses
the whole file before building anything, so a bad file never yields a
partial pool.
"""

import logging
from pathlib import Path
from typing import Optional

from ..exceptions import ContractViolation, PoolFormatError
from ..prompting.prompts import AlignerParams, PromptSet
from ..serialization import BinaryReader, BinaryWriter, atomic_write
from .pool import PoolEntry, PromptPool
from .prototype import Prototype

logger = logging.getLogger(__name__)

POOL_MAGIC = b"CPP1"
POOL_VERSION = 1
HASH_BYTES = 32


def encode_pool(pool: PromptPool) -> bytes:
    writer = BinaryWriter()
    writer.raw(POOL_MAGIC)
    writer.u32(POOL_VERSION)
    writer.raw(bytes.fromhex(pool.config_hash))
    writer.u32(len(pool))
    for entry in pool:
        writer.text(entry.task_id)
        writer.u32(entry.creation_step)
        writer.tensor(entry.key.vector)
        writer.tensor_list(entry.prompts.text)
        writer.tensor_list(entry.prompts.vision)
        writer.tensor_list(entry.aligner.v2t)
        writer.tensor_list(entry.aligner.t2v)
    return writer.getvalue()


def decode_pool(data: bytes, expected_hash: Optional[str] = None) -> PromptPool:
    """Parse a CPP1 file; `expected_hash` rejects pools built for another prompt shape."""
    reader = BinaryReader(data, PoolFormatError)
    if reader.raw(4) != POOL_MAGIC:
        reader.fail("bad magic, expected CPP1", 0)
    version = reader.u32()
    if version != POOL_VERSION:
        reader.fail(f"unsupported pool version {version}", 4)
    config_hash = reader.raw(HASH_BYTES).hex()
    if expected_hash is not None and config_hash != expected_hash:
        raise ContractViolation(
            f"pool config hash {config_hash[:12]} does not match expected {expected_hash[:12]}"
        )
    count = reader.u32()

    entries = []
    for _ in range(count):
        start = reader.offset
        task_id = reader.text()
        creation_step = reader.u32()
        key = reader.tensor()
        text, vision = reader.tensor_list(), reader.tensor_list()
        v2t, t2v = reader.tensor_list(), reader.tensor_list()
        try:
            entry = PoolEntry(
                task_id=task_id,
                key=Prototype(vector=key),
                prompts=PromptSet(text=text, vision=vision),
                aligner=AlignerParams(v2t=v2t, t2v=t2v),
                creation_step=creation_step,
                config_hash=config_hash,
            )
        except ValueError as e:
            reader.fail(f"invalid entry {task_id!r}: {e}", start)
        entries.append(entry)
    reader.expect_end()

    task_ids = [entry.task_id for entry in entries]
    if len(set(task_ids)) != len(task_ids):
        reader.fail("duplicate task ids in pool file", 0)
    return PromptPool(config_hash, entries)


def save_pool(pool: PromptPool, path: Path) -> None:
    atomic_write(Path(path), encode_pool(pool))
    logger.info("Saved pool with %d entries to %s", len(pool), path)


def load_pool(path: Path, expected_hash: Optional[str] = None) -> PromptPool:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Pool file not found: {path}")
    pool = decode_pool(path.read_bytes(), expected_hash)
    logger.info("Loaded pool with %d entries from %s", len(pool), path)
    return pool


pool_save = save_pool
pool_load = load_pool
