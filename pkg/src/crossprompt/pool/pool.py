"""
Prompt pool.

Entries (key, prompts, aligner) are kept in insertion order. Queries pick
the entry whose key has the highest cosine similarity with the query
prototype, ties going to the earliest entry, and fall back to the
prompt-free model when that similarity is below the threshold.

Entries are immutable and the entry tuple is swapped atomically under a
lock, so concurrent queries never observe a half-applied add.
"""

import logging
import math
import threading
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..exceptions import ContractViolation
from ..prompting.prompts import AlignerParams, PromptSet
from .prototype import Prototype

logger = logging.getLogger(__name__)


class PoolEntry(BaseModel):
    """One trained task: its key plus the prompt state retrieved for it."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    task_id: str = Field(min_length=1)
    key: Prototype
    prompts: PromptSet
    aligner: AlignerParams
    creation_step: int = Field(default=0, ge=0, description="Training step that created the entry")
    config_hash: str = Field(description="sha256 hex digest of the shape-defining config")


class PoolMatch(BaseModel):
    """Successful routing result."""

    model_config = ConfigDict(frozen=True)

    entry: PoolEntry
    index: int
    similarity: float


class Fallback(BaseModel):
    """No key was similar enough; route to the prompt-free model."""

    model_config = ConfigDict(frozen=True)

    best_similarity: Optional[float] = None
    reason: str = "below_threshold"


QueryResult = Union[PoolMatch, Fallback]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (math.sqrt(float(np.dot(a, a))) * math.sqrt(float(np.dot(b, b)))))


class PromptPool:
    """Ordered store of PoolEntry values sharing one config hash."""

    def __init__(self, config_hash: str, entries: Sequence[PoolEntry] = ()):
        self.config_hash = config_hash
        self._entries: tuple = ()
        self._lock = threading.Lock()
        for entry in entries:
            self.add(entry)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PoolEntry]:
        return iter(self._entries)

    def __getitem__(self, index: int) -> PoolEntry:
        return self._entries[index]

    @property
    def entries(self) -> tuple:
        return self._entries

    @property
    def task_ids(self) -> List[str]:
        return [entry.task_id for entry in self._entries]

    def get(self, task_id: str) -> Optional[PoolEntry]:
        for entry in self._entries:
            if entry.task_id == task_id:
                return entry
        return None

    def add(self, entry: PoolEntry) -> "PromptPool":
        """Append the entry, or replace the entry with the same task_id in place."""
        if entry.config_hash != self.config_hash:
            raise ContractViolation(
                f"entry {entry.task_id!r} was built for config {entry.config_hash[:12]}, "
                f"pool expects {self.config_hash[:12]}"
            )
        with self._lock:
            entries = list(self._entries)
            for index, existing in enumerate(entries):
                if existing.task_id == entry.task_id:
                    entries[index] = entry
                    logger.debug("Replaced pool entry %s at index %d", entry.task_id, index)
                    break
            else:
                entries.append(entry)
                logger.debug("Added pool entry %s at index %d", entry.task_id, len(entries) - 1)
            self._entries = tuple(entries)
        return self

    def snapshot(self, size: Optional[int] = None) -> "PromptPool":
        """A new pool holding the first `size` entries (all when None)."""
        entries = self._entries if size is None else self._entries[:size]
        return PromptPool(self.config_hash, entries)

    def similarities(self, query: Prototype) -> List[float]:
        q = query.array
        return [cosine_similarity(q, entry.key.array) for entry in self._entries]

    def query(self, query: Prototype, threshold: float) -> QueryResult:
        """Max-cosine routing with threshold fallback; an empty pool always falls back."""
        if threshold != threshold:
            raise ContractViolation("threshold must not be NaN")
        entries = self._entries
        if not entries:
            return Fallback(reason="empty_pool")
        sims = self.similarities(query)
        best = 0
        for index in range(1, len(sims)):
            if sims[index] > sims[best]:
                best = index
        if sims[best] >= threshold:
            return PoolMatch(entry=entries[best], index=best, similarity=sims[best])
        return Fallback(best_similarity=sims[best])

    def key_similarity_matrix(self) -> np.ndarray:
        keys = [entry.key.array for entry in self._entries]
        return np.array([[cosine_similarity(a, b) for b in keys] for a in keys])

    def routing_margin(self) -> Optional[float]:
        """Own-key similarity minus the largest cross-key similarity (None below 2 entries)."""
        if len(self._entries) < 2:
            return None
        sims = self.key_similarity_matrix()
        own = np.diag(sims)
        cross = sims - np.diag(np.full(len(own), np.inf))
        return float(np.min(own - cross.max(axis=1)))


def pool_add(pool: PromptPool, entry: PoolEntry) -> PromptPool:
    return pool.add(entry)


def pool_query(pool: PromptPool, query: Prototype, threshold: float) -> QueryResult:
    return pool.query(query, threshold)
