import struct

import numpy as np
import pytest

from crossprompt.exceptions import ContractViolation, PoolFormatError
from crossprompt.models import pool_config_hash
from crossprompt.numeric import Rng, Tensor
from crossprompt.pool import (
    PoolEntry,
    PromptPool,
    Prototype,
    decode_pool,
    encode_pool,
    load_pool,
    save_pool,
)
from crossprompt.prompting import AlignerParams, init_prompts


@pytest.fixture
def three_entry_pool(tiny_config):
    config_hash = pool_config_hash(tiny_config, 2, 2)
    rng = np.random.default_rng(0)
    pool = PromptPool(config_hash)
    for index in range(3):
        key = rng.normal(size=tiny_config.joint_width)
        aligner = AlignerParams(
            v2t=[Tensor(rng.normal(size=(8, 8))) for _ in range(2)],
            t2v=[Tensor(rng.normal(size=(8, 8))) for _ in range(2)],
        )
        pool.add(
            PoolEntry(
                task_id=f"domain-{index}",
                key=Prototype(vector=Tensor(key / np.linalg.norm(key))),
                prompts=init_prompts(tiny_config, 2, 2, Rng(index), std=1.0),
                aligner=aligner,
                creation_step=index + 1,
                config_hash=config_hash,
            )
        )
    return pool


def test_empty_pool_round_trip(tiny_config, tmp_path):
    pool = PromptPool(pool_config_hash(tiny_config, 0, 2))
    save_pool(pool, tmp_path / "pool.cpp")
    loaded = load_pool(tmp_path / "pool.cpp")
    assert len(loaded) == 0
    assert loaded.config_hash == pool.config_hash


def test_three_entries_round_trip_bit_exact(three_entry_pool, tmp_path):
    path = tmp_path / "pool.cpp"
    save_pool(three_entry_pool, path)
    loaded = load_pool(path)
    assert loaded.task_ids == three_entry_pool.task_ids
    assert encode_pool(loaded) == path.read_bytes()
    for before, after in zip(three_entry_pool, loaded):
        assert before.creation_step == after.creation_step
        assert before.key.vector.tobytes() == after.key.vector.tobytes()
        pairs = zip(
            before.prompts.text + before.prompts.vision + before.aligner.v2t + before.aligner.t2v,
            after.prompts.text + after.prompts.vision + after.aligner.v2t + after.aligner.t2v,
        )
        for a, b in pairs:
            assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("offset", [0, 3, 4])
def test_corrupted_header_byte_fails(three_entry_pool, offset):
    data = bytearray(encode_pool(three_entry_pool))
    data[offset] ^= 0x5A
    with pytest.raises(PoolFormatError) as info:
        decode_pool(bytes(data))
    assert info.value.offset in (0, 4)


HASH_OFFSET = 8
COUNT_OFFSET = 40
# magic, version, hash, count, then "domain-0" (u16 length + 8 bytes) and creation_step
FIRST_KEY_OFFSET = 44 + 2 + 8 + 4


def test_corrupted_hash_byte_rejected_against_expected_hash(three_entry_pool, tmp_path):
    data = bytearray(encode_pool(three_entry_pool))
    data[HASH_OFFSET + 5] ^= 0x01
    assert decode_pool(bytes(data)).config_hash != three_entry_pool.config_hash
    with pytest.raises(ContractViolation):
        decode_pool(bytes(data), expected_hash=three_entry_pool.config_hash)

    path = tmp_path / "pool.cpp"
    path.write_bytes(bytes(data))
    with pytest.raises(ContractViolation):
        load_pool(path, expected_hash=three_entry_pool.config_hash)


def test_matching_expected_hash_loads(three_entry_pool, tmp_path):
    save_pool(three_entry_pool, tmp_path / "pool.cpp")
    loaded = load_pool(tmp_path / "pool.cpp", expected_hash=three_entry_pool.config_hash)
    assert loaded.task_ids == three_entry_pool.task_ids


@pytest.mark.parametrize("count", [0, 2, 4, 0xFFFFFFFF])
def test_corrupted_entry_count_fails(three_entry_pool, count):
    data = bytearray(encode_pool(three_entry_pool))
    data[COUNT_OFFSET : COUNT_OFFSET + 4] = struct.pack("<I", count)
    with pytest.raises(PoolFormatError):
        decode_pool(bytes(data))


def test_oversized_tensor_dims_fail(three_entry_pool):
    data = encode_pool(three_entry_pool)
    assert struct.unpack_from("<I", data, FIRST_KEY_OFFSET)[0] == 1
    header = struct.pack("<III", 2, 0xFFFFFFFF, 0xFFFFFFFF)
    corrupted = data[:FIRST_KEY_OFFSET] + header + data[FIRST_KEY_OFFSET + 8 :]
    with pytest.raises(PoolFormatError) as info:
        decode_pool(corrupted)
    assert info.value.offset == FIRST_KEY_OFFSET


def test_dims_larger_than_payload_fail(three_entry_pool):
    data = bytearray(encode_pool(three_entry_pool))
    data[FIRST_KEY_OFFSET + 4 : FIRST_KEY_OFFSET + 8] = struct.pack("<I", 1 << 20)
    with pytest.raises(PoolFormatError) as info:
        decode_pool(bytes(data))
    assert info.value.offset == FIRST_KEY_OFFSET


def test_truncated_file_fails(three_entry_pool):
    data = encode_pool(three_entry_pool)
    for cut in (2, 10, len(data) // 2, len(data) - 1):
        with pytest.raises(PoolFormatError):
            decode_pool(data[:cut])


def test_trailing_bytes_fail(three_entry_pool):
    with pytest.raises(PoolFormatError):
        decode_pool(encode_pool(three_entry_pool) + b"\x00\x00")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_pool(tmp_path / "missing.cpp")
