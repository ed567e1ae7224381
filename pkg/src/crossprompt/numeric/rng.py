"""Seeded random source with deterministic child streams."""

import hashlib
from typing import Sequence, Tuple, Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, int):
        return key
    # stable across processes, unlike hash()
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")


class Rng:
    """
    PCG64 stream seeded from (seed, *keys).

    Identical seed and identical call sequence give bit-identical draws.
    child(...) derives an independent stream without consuming draws from
    this one, so adding a new consumer never shifts existing streams.
    """

    def __init__(self, seed: int, keys: Sequence[Key] = ()):
        self.seed = int(seed)
        self.keys: Tuple[int, ...] = tuple(_key_to_int(k) for k in keys)
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, *self.keys]
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def child(self, *keys: Key) -> "Rng":
        return Rng(self.seed, (*self.keys, *(_key_to_int(k) for k in keys)))

    def normal(self, shape: Sequence[int], std: float = 1.0) -> np.ndarray:
        return self._generator.normal(0.0, std, size=tuple(shape))

    def uniform(self, shape: Sequence[int], low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._generator.uniform(low, high, size=tuple(shape))

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator.choice(n, size=size, replace=replace)
