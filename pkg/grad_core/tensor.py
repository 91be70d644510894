"""
Tensor and Tape
Dense float64 tensors with reverse-mode gradient recording
"""

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DetachedRoot, NotScalarRoot, ShapeMismatch

logger = logging.getLogger(__name__)

DTYPE = np.float64

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


def _tape_stack() -> List[Optional["Tape"]]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    """Return the innermost tape of the calling thread, if any"""
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_tape() -> Iterator[None]:
    """Suspend recording for the enclosed block"""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


class Tensor:
    """Dense n-dimensional array that may participate in a gradient tape"""

    __slots__ = ("data", "requires_grad", "node_id", "_tape")
    __array_priority__ = 1000

    def __init__(self, data: Any, requires_grad: bool = False, copy: bool = True):
        self.data = np.array(data, dtype=DTYPE) if copy else np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None
        self._tape: Optional["Tape"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # Arithmetic delegates to the op table so every path is recorded the same way.
    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor division is only defined for python scalars")
        return ops.mul(self, 1.0 / float(other))

    def __neg__(self):
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        return ops.matmul(other, self)

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        return ops.sum(self, axis=axis)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        return ops.mean(self, axis=axis)

    def square(self) -> "Tensor":
        return ops.square(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


@dataclass
class TapeNode:
    """One recorded op: inputs are node ids, -1 for operands outside the graph"""

    kind: str
    inputs: Tuple[int, ...]
    backward_fn: Optional[BackwardFn]
    shape: Tuple[int, ...]
    leaf: Optional[Tensor] = None


class Tape:
    """Append-only op record; use as a context manager to make it active"""

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self.gradients: Dict[int, np.ndarray] = {}
        self._leaf_ids: Dict[int, int] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _tape_stack().pop()
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, tensor: Tensor) -> int:
        """Register a tensor as a leaf (idempotent) and return its node id"""
        if tensor._tape is self and tensor.node_id is not None:
            return tensor.node_id
        key = id(tensor)
        if key not in self._leaf_ids:
            self._leaf_ids[key] = len(self.nodes)
            self.nodes.append(TapeNode("leaf", (), None, tensor.shape, leaf=tensor))
        return self._leaf_ids[key]

    def node_of(self, tensor: Tensor) -> Optional[int]:
        if tensor._tape is self:
            return tensor.node_id
        return self._leaf_ids.get(id(tensor))

    def record(self, kind: str, inputs: Sequence[Tensor], data: np.ndarray, backward_fn: BackwardFn) -> Tensor:
        input_ids = tuple(self.watch(t) if t.requires_grad else -1 for t in inputs)
        node_id = len(self.nodes)
        self.nodes.append(TapeNode(kind, input_ids, backward_fn, data.shape))
        out = Tensor(data, requires_grad=True, copy=False)
        out._tape = self
        out.node_id = node_id
        return out

    def grad(self, tensor: Tensor) -> Optional[np.ndarray]:
        node_id = self.node_of(tensor)
        return None if node_id is None else self.gradients.get(node_id)


class GradientMap:
    """Gradients of one backward pass, looked up by tensor"""

    def __init__(self, tape: Tape, gradients: Dict[int, np.ndarray]):
        self.tape = tape
        self.gradients = gradients

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self.get(tensor)
        if grad is None:
            raise KeyError(f"no gradient recorded for {tensor!r}")
        return grad

    def get(self, tensor: Tensor, default: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        node_id = self.tape.node_of(tensor)
        if node_id is None:
            return default
        return self.gradients.get(node_id, default)

    def __contains__(self, tensor: Tensor) -> bool:
        return self.get(tensor) is not None

    def named(self, tensors: Mapping[str, Tensor]) -> Dict[str, np.ndarray]:
        """Gradients for the named tensors that received one"""
        out = {}
        for name, tensor in tensors.items():
            grad = self.get(tensor)
            if grad is not None:
                out[name] = grad
        return out


def backward(root: Tensor, tape: Optional[Tape] = None) -> GradientMap:
    """Reverse sweep from a scalar root; every watched leaf gets a gradient"""
    if root.size != 1:
        raise NotScalarRoot(f"backward root must be scalar, got shape {root.shape}")
    tape = tape if tape is not None else root._tape
    if tape is None:
        raise DetachedRoot("root was produced outside any tape")
    root_id = tape.node_of(root)
    if root_id is None:
        raise DetachedRoot("root is not recorded on this tape")

    grads: Dict[int, np.ndarray] = {root_id: np.ones(root.shape, dtype=DTYPE)}
    for node_id in range(root_id, -1, -1):
        node = tape.nodes[node_id]
        grad = grads.get(node_id)
        if node.leaf is not None:
            if grad is None:
                grads[node_id] = np.zeros(node.shape, dtype=DTYPE)
            continue
        if grad is None or node.backward_fn is None:
            continue
        for input_id, input_grad in zip(node.inputs, node.backward_fn(grad)):
            if input_id < 0 or input_grad is None:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + input_grad
            else:
                grads[input_id] = input_grad

    tape.gradients = grads
    logger.debug(f"backward over {root_id + 1} nodes")
    return GradientMap(tape, grads)


from . import ops  # noqa: E402  (ops needs Tensor defined first)
