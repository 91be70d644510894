"""
Differentiable Ops
Forward semantics and local adjoints for every op kind the lab records
"""

import logging
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NonFinite, ShapeMismatch, UnsupportedOp
from .tensor import DTYPE, Tensor, active_tape

logger = logging.getLogger(__name__)

Operand = Union[Tensor, float, int, np.ndarray]


def lift(value: Operand) -> Tensor:
    """Wrap python scalars and arrays as constant tensors"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, copy=False)


def _emit(kind: str, inputs: Sequence[Tensor], data: np.ndarray, backward_fn) -> Tensor:
    data = np.asarray(data, dtype=DTYPE)
    if not np.all(np.isfinite(data)):
        raise NonFinite(f"{kind} produced NaN/Inf")
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        return tape.record(kind, inputs, data, backward_fn)
    return Tensor(data, copy=False)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(np.sum(grad), dtype=DTYPE).reshape(shape)


def _pair(kind: str, a: Operand, b: Operand) -> Tuple[Tensor, Tensor, np.ndarray, np.ndarray]:
    """Identical shapes, or one side with a single element (scalar broadcast)"""
    a, b = lift(a), lift(b)
    if a.shape == b.shape:
        return a, b, a.data, b.data
    if a.size == 1:
        return a, b, a.data.reshape(()), b.data
    if b.size == 1:
        return a, b, a.data, b.data.reshape(())
    raise ShapeMismatch(f"{kind}: {a.shape} vs {b.shape} (only scalar broadcast is supported)")


def add(a: Operand, b: Operand) -> Tensor:
    a, b, x, y = _pair("add", a, b)

    def backward_fn(g):
        return (_reduce_to(g, a.shape) if a.requires_grad else None,
                _reduce_to(g, b.shape) if b.requires_grad else None)

    return _emit("add", (a, b), x + y, backward_fn)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b, x, y = _pair("sub", a, b)

    def backward_fn(g):
        return (_reduce_to(g, a.shape) if a.requires_grad else None,
                _reduce_to(-g, b.shape) if b.requires_grad else None)

    return _emit("sub", (a, b), x - y, backward_fn)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b, x, y = _pair("mul", a, b)

    def backward_fn(g):
        return (_reduce_to(g * y, a.shape) if a.requires_grad else None,
                _reduce_to(g * x, b.shape) if b.requires_grad else None)

    return _emit("mul", (a, b), x * y, backward_fn)


def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = lift(a), lift(b)
    x, y = a.data, b.data
    if x.ndim not in (1, 2) or y.ndim not in (1, 2):
        raise ShapeMismatch(f"matmul supports 1-D and 2-D operands, got {x.shape} @ {y.shape}")
    if x.shape[-1] != y.shape[0]:
        raise ShapeMismatch(f"matmul inner dims differ: {x.shape} @ {y.shape}")

    def backward_fn(g):
        ga = gb = None
        if a.requires_grad:
            if y.ndim == 2:
                ga = g @ y.T
            elif x.ndim == 2:
                ga = np.outer(g, y)
            else:
                ga = g * y
        if b.requires_grad:
            if x.ndim == 2:
                gb = x.T @ g
            elif y.ndim == 2:
                gb = np.outer(x, g)
            else:
                gb = g * x
        return ga, gb

    return _emit("matmul", (a, b), x @ y, backward_fn)


def affine(x: Operand, weight: Operand, bias: Operand) -> Tensor:
    """x @ weight + bias, the bias added to every row"""
    x, weight, bias = lift(x), lift(weight), lift(bias)
    if weight.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != weight.shape[0]:
        raise ShapeMismatch(f"affine: {x.shape} @ {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeMismatch(f"affine bias {bias.shape} does not match {weight.shape}")
    xd, wd = x.data, weight.data

    def backward_fn(g):
        gx = g @ wd.T if x.requires_grad else None
        gw = None
        if weight.requires_grad:
            gw = xd.T @ g if xd.ndim == 2 else np.outer(xd, g)
        gb = None
        if bias.requires_grad:
            gb = g.sum(axis=0) if g.ndim == 2 else g
        return gx, gw, gb

    return _emit("affine", (x, weight, bias), xd @ wd + bias.data, backward_fn)


def relu(x: Operand) -> Tensor:
    x = lift(x)
    mask = x.data > 0

    def backward_fn(g):
        return (g * mask,)

    return _emit("relu", (x,), np.where(mask, x.data, 0.0), backward_fn)


def tanh(x: Operand) -> Tensor:
    x = lift(x)
    y = np.tanh(x.data)

    def backward_fn(g):
        return (g * (1.0 - y * y),)

    return _emit("tanh", (x,), y, backward_fn)


def sigmoid(x: Operand) -> Tensor:
    x = lift(x)
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward_fn(g):
        return (g * y * (1.0 - y),)

    return _emit("sigmoid", (x,), y, backward_fn)


def square(x: Operand) -> Tensor:
    x = lift(x)
    xd = x.data

    def backward_fn(g):
        return (2.0 * g * xd,)

    return _emit("square", (x,), xd * xd, backward_fn)


def sqrt(x: Operand) -> Tensor:
    x = lift(x)
    with np.errstate(invalid="ignore"):
        y = np.sqrt(x.data)

    def backward_fn(g):
        with np.errstate(divide="ignore"):
            return (g / (2.0 * y),)

    return _emit("sqrt", (x,), y, backward_fn)


def sum(x: Operand, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    x = lift(x)
    shape = x.shape

    def backward_fn(g):
        if axis is None:
            return (np.full(shape, float(np.sum(g)), dtype=DTYPE),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("sum", (x,), np.sum(x.data, axis=axis), backward_fn)


def mean(x: Operand, axis: Optional[int] = None) -> Tensor:
    x = lift(x)
    shape = x.shape
    count = x.size if axis is None else shape[axis]

    def backward_fn(g):
        if axis is None:
            return (np.full(shape, float(np.sum(g)) / count, dtype=DTYPE),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape) / count,)

    return _emit("mean", (x,), np.mean(x.data, axis=axis), backward_fn)


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = [lift(t) for t in tensors]
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {[p.shape for p in parts]} along axis {axis}") from exc
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward_fn(g):
        pieces = np.split(g, bounds, axis=axis)
        return tuple(piece if p.requires_grad else None for piece, p in zip(pieces, parts))

    return _emit("concat", parts, data, backward_fn)


def reshape(x: Operand, shape: Sequence[int]) -> Tensor:
    x = lift(x)
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeMismatch(f"reshape {x.shape} -> {tuple(shape)}") from exc
    original = x.shape

    def backward_fn(g):
        return (g.reshape(original),)

    return _emit("reshape", (x,), data, backward_fn)


def slice(x: Operand, index: Any) -> Tensor:  # noqa: A001
    """Basic slicing or integer-array row gather; repeated rows accumulate"""
    x = lift(x)
    try:
        data = np.array(x.data[index])
    except IndexError as exc:
        raise ShapeMismatch(f"slice {index!r} out of range for {x.shape}") from exc
    shape = x.shape

    def backward_fn(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, index, g)
        return (full,)

    return _emit("slice", (x,), data, backward_fn)


def l2norm(x: Operand, axis: int = -1) -> Tensor:
    """Euclidean norm along one axis (the whole vector for 1-D input)"""
    x = lift(x)
    xd = x.data
    norm = np.sqrt(np.sum(xd * xd, axis=axis))

    def backward_fn(g):
        n = np.expand_dims(norm, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, np.expand_dims(g, axis) * xd / safe, 0.0),)

    return _emit("l2norm", (x,), norm, backward_fn)


def normalize(x: Operand, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Scale to unit norm along one axis; rows with norm <= eps become the constant unit vector"""
    x = lift(x)
    xd = x.data
    norm = np.sqrt(np.sum(xd * xd, axis=axis, keepdims=True))
    live = norm > eps
    denom = np.where(live, norm, 1.0)
    fallback = np.full_like(xd, 1.0 / np.sqrt(xd.shape[axis]))
    y = np.where(live, xd / denom, fallback)

    def backward_fn(g):
        radial = np.sum(g * y, axis=axis, keepdims=True)
        return (np.where(live, (g - y * radial) / denom, 0.0),)

    return _emit("normalize", (x,), y, backward_fn)


def log_softmax(x: Operand, axis: int = -1) -> Tensor:
    x = lift(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    y = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def backward_fn(g):
        return (g - np.exp(y) * np.sum(g, axis=axis, keepdims=True),)

    return _emit("log_softmax", (x,), y, backward_fn)


OP_TABLE: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "matmul": matmul,
    "affine": affine,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "sum": sum,
    "mean": mean,
    "square": square,
    "sqrt": sqrt,
    "concat": lambda *tensors, axis=0: concat(tensors, axis=axis),
    "reshape": reshape,
    "slice": slice,
    "l2norm": l2norm,
    "normalize": normalize,
    "log_softmax": log_softmax,
}


def op_forward(kind: str, *inputs: Operand, **attrs: Any) -> Tensor:
    """Run one op by kind name, recording it when any input needs a gradient"""
    try:
        fn = OP_TABLE[kind]
    except KeyError:
        raise UnsupportedOp(f"unknown op kind: {kind}") from None
    return fn(*inputs, **attrs)
