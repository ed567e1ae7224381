"""
Dense float64 tensors and the gradient tape.

A Tensor wraps a read-only numpy array and never changes after creation;
every op returns a new Tensor. While a GradTape is active, ops whose inputs
are watched parameters (or outputs of recorded ops) append a node holding a
backward closure. backward() replays those nodes in reverse recording order,
so gradient accumulation order is fixed for a given forward pass.
"""

from __future__ import annotations

import itertools
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..exceptions import ContractViolation

logger = logging.getLogger(__name__)

_tensor_ids = itertools.count(1)
_active_tape: ContextVar[Optional["GradTape"]] = ContextVar("crossprompt_tape", default=None)

BackwardFn = Callable[[np.ndarray, Tuple[bool, ...]], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    Immutable dense array of 64-bit floats in row-major order.

    Shapes are tuples of non-negative ints; a scalar has shape ().
    Tensors are safe to share across threads.
    """

    __slots__ = ("_data", "_id")

    def __init__(self, data) -> None:
        array = np.array(data, dtype=np.float64, order="C", copy=True)
        array.flags.writeable = False
        self._data = array
        self._id = next(_tensor_ids)

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        """Take ownership of a freshly computed array without copying."""
        tensor = cls.__new__(cls)
        array = np.ascontiguousarray(array, dtype=np.float64)
        array.flags.writeable = False
        tensor._data = array
        tensor._id = next(_tensor_ids)
        return tensor

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "Tensor":
        return cls._wrap(np.zeros(tuple(shape), dtype=np.float64))

    @classmethod
    def scalar(cls, value: float) -> "Tensor":
        return cls._wrap(np.array(float(value), dtype=np.float64))

    @property
    def id(self) -> int:
        return self._id

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    def numpy(self) -> np.ndarray:
        """Writable copy of the data."""
        return np.array(self._data, copy=True)

    def item(self) -> float:
        if self._data.size != 1:
            raise ContractViolation(f"item() needs a single element, shape is {self.shape}")
        return float(self._data.reshape(()))

    def tobytes(self) -> bytes:
        """Little-endian float64 payload in row-major order."""
        return self._data.astype("<f8", copy=False).tobytes(order="C")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._data)))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


@dataclass(frozen=True)
class _Node:
    output: int
    inputs: Tuple[int, ...]
    backward: BackwardFn


class GradTape:
    """
    Records differentiable ops executed while the tape is active.

    Usage:
        with GradTape() as tape:
            tape.watch(weight, "weight")
            loss = ...
        grads = backward(tape, loss)

    A tape is single-owner: do not share it across threads.
    """

    def __init__(self) -> None:
        self._nodes: List[_Node] = []
        self._params: Dict[int, str] = {}
        self._names: Dict[str, int] = {}
        self._shapes: Dict[int, Tuple[int, ...]] = {}
        self._tracked: Set[int] = set()
        self._touched: Set[int] = set()
        self._token = None

    def __enter__(self) -> "GradTape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def watch(self, tensor: Tensor, name: str) -> Tensor:
        """Mark a tensor as a trainable parameter identified by name."""
        existing = self._names.get(name)
        if existing is not None and existing != tensor.id:
            raise ContractViolation(f"Parameter name already watched: {name}")
        self._params[tensor.id] = name
        self._names[name] = tensor.id
        self._shapes[tensor.id] = tensor.shape
        self._tracked.add(tensor.id)
        return tensor

    @property
    def parameter_names(self) -> List[str]:
        return list(self._names)

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    def _record(self, output: Tensor, inputs: Sequence[Tensor], fn: BackwardFn) -> None:
        if not any(t.id in self._tracked for t in inputs):
            return
        for t in inputs:
            if t.id in self._params:
                self._touched.add(t.id)
        self._nodes.append(_Node(output.id, tuple(t.id for t in inputs), fn))
        self._tracked.add(output.id)


def record(output: Tensor, inputs: Sequence[Tensor], fn: BackwardFn) -> Tensor:
    """Attach an op to the active tape, if any, and return its output."""
    tape = _active_tape.get()
    if tape is not None:
        tape._record(output, inputs, fn)
    return output


@contextmanager
def no_tape() -> Iterator[None]:
    """Run a block with recording disabled."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


def backward(tape: GradTape, loss: Tensor) -> Dict[str, Tensor]:
    """
    Reverse-mode gradients of a scalar loss.

    Returns a map from parameter name to gradient for every watched
    parameter that fed at least one recorded op. Parameters that were
    watched but never used are absent; tensors never watched (the frozen
    backbone during prompt tuning) never get an entry.
    """
    if loss.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {loss.id: np.ones(loss.shape, dtype=np.float64)}
    for node in reversed(tape._nodes):
        upstream = grads.pop(node.output, None)
        if upstream is None:
            continue
        needs = tuple(i in tape._tracked for i in node.inputs)
        input_grads = node.backward(upstream, needs)
        for input_id, grad, need in zip(node.inputs, input_grads, needs):
            if not need or grad is None:
                continue
            previous = grads.get(input_id)
            grads[input_id] = grad if previous is None else previous + grad

    result: Dict[str, Tensor] = {}
    for param_id, name in tape._params.items():
        if param_id not in tape._touched:
            continue
        grad = grads.get(param_id)
        if grad is None:
            grad = np.zeros(tape._shapes[param_id], dtype=np.float64)
        result[name] = Tensor._wrap(np.array(grad, dtype=np.float64, copy=True))
    logger.debug("backward over %d nodes -> %d gradients", len(tape._nodes), len(result))
    return result
