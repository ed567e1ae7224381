"""
Little-endian binary codec shared by the backbone checkpoint and pool files.

A tensor record is: rank (u32), dims (u32 each), float64 payload in
row-major order. Readers track the byte offset so decoding failures can
name where the file went wrong.
"""

import io
import math
import os
import struct
from pathlib import Path
from typing import List, Sequence, Type

import numpy as np

from .exceptions import FormatError
from .numeric.tensor import Tensor

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
MAX_RANK = 8


class BinaryWriter:
    """Append-only byte buffer."""

    def __init__(self) -> None:
        self._buffer = io.BytesIO()

    def raw(self, data: bytes) -> None:
        self._buffer.write(data)

    def u16(self, value: int) -> None:
        self._buffer.write(_U16.pack(value))

    def u32(self, value: int) -> None:
        self._buffer.write(_U32.pack(value))

    def text(self, value: str) -> None:
        encoded = value.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"string too long to encode: {len(encoded)} bytes")
        self.u16(len(encoded))
        self.raw(encoded)

    def tensor(self, tensor: Tensor) -> None:
        self.u32(tensor.ndim)
        for dim in tensor.shape:
            self.u32(dim)
        self.raw(tensor.tobytes())

    def tensor_list(self, tensors: Sequence[Tensor]) -> None:
        self.u32(len(tensors))
        for tensor in tensors:
            self.tensor(tensor)

    def getvalue(self) -> bytes:
        return self._buffer.getvalue()


class BinaryReader:
    """Bounds-checked reader raising `error_cls` with the failing offset."""

    def __init__(self, data: bytes, error_cls: Type[FormatError] = FormatError):
        self._data = memoryview(data)
        self.offset = 0
        self._error_cls = error_cls

    def fail(self, message: str, offset: int = None) -> None:
        raise self._error_cls(message, self.offset if offset is None else offset)

    def raw(self, n: int) -> bytes:
        if n < 0:
            self.fail(f"negative length {n}")
        if self.offset + n > len(self._data):
            self.fail(f"truncated: needed {n} bytes, {len(self._data) - self.offset} left")
        chunk = bytes(self._data[self.offset : self.offset + n])
        self.offset += n
        return chunk

    def u16(self) -> int:
        return _U16.unpack(self.raw(_U16.size))[0]

    def u32(self) -> int:
        return _U32.unpack(self.raw(_U32.size))[0]

    def text(self) -> str:
        start = self.offset
        length = self.u16()
        try:
            return self.raw(length).decode("utf-8")
        except UnicodeDecodeError:
            self.fail("invalid UTF-8 string", start)

    def tensor(self) -> Tensor:
        start = self.offset
        rank = self.u32()
        if rank > MAX_RANK:
            self.fail(f"implausible tensor rank {rank}", start)
        shape = tuple(self.u32() for _ in range(rank))
        count = math.prod(shape)
        if count * 8 > self.remaining:
            self.fail(f"tensor of shape {shape} exceeds the {self.remaining} bytes left", start)
        payload = self.raw(count * 8)
        array = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        return Tensor(array)

    def tensor_list(self) -> List[Tensor]:
        count = self.u32()
        return [self.tensor() for _ in range(count)]

    @property
    def remaining(self) -> int:
        return len(self._data) - self.offset

    def expect_end(self) -> None:
        if self.offset != len(self._data):
            self.fail(f"{len(self._data) - self.offset} trailing bytes")


def atomic_write(path: Path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
