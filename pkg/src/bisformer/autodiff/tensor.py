"""Eager reverse-mode automatic differentiation over dense float64 arrays.

Every primitive computes its value immediately and, when any input requires a
gradient, records a closure that maps the output gradient to input gradients.
`backward` replays those closures in reverse topological order.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from bisformer.core.errors import DomainError, NonFiniteValue, NonScalarOutput, ShapeMismatch

Axis = Union[None, int, Tuple[int, ...]]
Operand = Union["Node", np.ndarray, float, int]

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Evaluate without recording backward rules (inference, finite differences)."""
    previous = _grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def as_array(value) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NonFiniteValue("array contains NaN or Inf", shape=list(array.shape))
    return array


class Node:
    __slots__ = ("value", "_grad", "parents", "_backward", "requires_grad", "name", "op")

    def __init__(
        self,
        value,
        parents: Tuple["Node", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        requires_grad: bool = False,
        name: Optional[str] = None,
        op: str = "leaf",
        validated: bool = False,
    ):
        self.value = value if validated else as_array(value)
        self._grad: Optional[np.ndarray] = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad
        self.name = name
        self.op = op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def grad(self) -> np.ndarray:
        return np.zeros_like(self.value) if self._grad is None else self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        if self.value.size != 1:
            raise NonScalarOutput(f"item() on array of shape {self.shape}")
        return float(self.value.reshape(()))

    def _accumulate(self, g: np.ndarray) -> None:
        self._grad = g if self._grad is None else self._grad + g

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Node(op={self.op}{label}, shape={self.shape})"

    # operators
    def __add__(self, other: Operand) -> "Node":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Node":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Node":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Node":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Node":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Node":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Node":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Node":
        return div(other, self)

    def __neg__(self) -> "Node":
        return neg(self)

    def __pow__(self, exponent: float) -> "Node":
        return power(self, exponent)

    def __matmul__(self, other: Operand) -> "Node":
        return matmul(self, other)

    def __getitem__(self, index) -> "Node":
        return getitem(self, index)

    def sum(self, axis: Axis = None, keepdims: bool = False) -> "Node":
        return sum_(self, axis, keepdims)

    def mean(self, axis: Axis = None, keepdims: bool = False) -> "Node":
        return mean(self, axis, keepdims)

    def reshape(self, *shape) -> "Node":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def constant(value, name: Optional[str] = None) -> Node:
    return Node(value, name=name, op="const")


def parameter(value, name: Optional[str] = None) -> Node:
    return Node(value, requires_grad=True, name=name, op="param")


def lift(x: Operand) -> Node:
    return x if isinstance(x, Node) else Node(x, op="const")


def _result(value: np.ndarray, parents: Tuple[Node, ...], backward: Callable, op: str) -> Node:
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"{op} produced NaN or Inf", op=op)
    tracked = _grad_enabled() and any(p.requires_grad for p in parents)
    if not tracked:
        return Node(value, op=op, validated=True)
    return Node(value, parents=parents, backward=backward, requires_grad=True, op=op, validated=True)


def _check_broadcast(a: Tuple[int, ...], b: Tuple[int, ...], op: str) -> None:
    if a == b:
        return
    if int(np.prod(a)) == 1 and len(a) <= len(b) or int(np.prod(b)) == 1 and len(b) <= len(a):
        return
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if long_[len(long_) - len(short):] == short:
        return
    raise ShapeMismatch(f"{op}: shapes {a} and {b} are not trailing-compatible", op=op)


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# elementwise binary

def add(a: Operand, b: Operand) -> Node:
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape, "add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.value + b.value, (a, b), backward, "add")


def sub(a: Operand, b: Operand) -> Node:
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape, "sub")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _result(a.value - b.value, (a, b), backward, "sub")


def mul(a: Operand, b: Operand) -> Node:
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape, "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _result(a.value * b.value, (a, b), backward, "mul")


def div(a: Operand, b: Operand) -> Node:
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape, "div")
    if np.any(b.value == 0):
        raise DomainError("division by zero")
    out = a.value / b.value

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * out / b.value, b.shape))

    return _result(out, (a, b), backward, "div")


def neg(a: Operand) -> Node:
    a = lift(a)

    def backward(g):
        a._accumulate(-g)

    return _result(-a.value, (a,), backward, "neg")


def power(a: Operand, exponent: float) -> Node:
    a = lift(a)
    if not float(exponent).is_integer() and np.any(a.value <= 0):
        raise DomainError("fractional power of a non-positive value")
    out = np.power(a.value, exponent)

    def backward(g):
        a._accumulate(g * exponent * np.power(a.value, exponent - 1))

    return _result(out, (a,), backward, "pow")


def matmul(a: Operand, b: Operand) -> Node:
    a, b = lift(a), lift(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}", op="matmul")
    try:
        out = np.matmul(a.value, b.value)
    except ValueError as e:
        raise ShapeMismatch(f"matmul: {e}", op="matmul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.value, -1, -2)), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.value, -1, -2), g), b.shape))

    return _result(out, (a, b), backward, "matmul")


# elementwise unary

def exp(a: Operand) -> Node:
    a = lift(a)
    out = np.exp(a.value)

    def backward(g):
        a._accumulate(g * out)

    return _result(out, (a,), backward, "exp")


def log(a: Operand) -> Node:
    a = lift(a)
    if np.any(a.value <= 0):
        raise DomainError("log of a non-positive value")

    def backward(g):
        a._accumulate(g / a.value)

    return _result(np.log(a.value), (a,), backward, "log")


def tanh(a: Operand) -> Node:
    a = lift(a)
    out = np.tanh(a.value)

    def backward(g):
        a._accumulate(g * (1.0 - out * out))

    return _result(out, (a,), backward, "tanh")


def sigmoid(a: Operand) -> Node:
    a = lift(a)
    out = expit(a.value)

    def backward(g):
        a._accumulate(g * out * (1.0 - out))

    return _result(out, (a,), backward, "sigmoid")


def relu(a: Operand) -> Node:
    a = lift(a)
    mask = a.value > 0

    def backward(g):
        a._accumulate(g * mask)

    return _result(np.where(mask, a.value, 0.0), (a,), backward, "relu")


def elu(a: Operand, alpha: float = 1.0) -> Node:
    a = lift(a)
    mask = a.value > 0
    neg_part = alpha * np.expm1(np.minimum(a.value, 0.0))

    def backward(g):
        a._accumulate(g * np.where(mask, 1.0, neg_part + alpha))

    return _result(np.where(mask, a.value, neg_part), (a,), backward, "elu")


def softmax(a: Operand, axis: int = -1) -> Node:
    a = lift(a)
    if a.ndim == 0 or not -a.ndim <= axis < a.ndim:
        raise ShapeMismatch(f"softmax axis {axis} invalid for shape {a.shape}", op="softmax")
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        a._accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _result(out, (a,), backward, "softmax")


# reductions and shape ops

def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeMismatch(f"axis {ax} out of range for {ndim}-d array")
    return tuple(sorted(ax % ndim for ax in axes))


def sum_(a: Operand, axis: Axis = None, keepdims: bool = False) -> Node:
    a = lift(a)
    axes = _normalize_axes(axis, a.ndim)
    out = a.value.sum(axis=axes, keepdims=keepdims)
    kept_shape = tuple(1 if i in axes else n for i, n in enumerate(a.shape))

    def backward(g):
        a._accumulate(np.broadcast_to(g.reshape(kept_shape), a.shape).copy())

    return _result(np.asarray(out), (a,), backward, "sum")


def mean(a: Operand, axis: Axis = None, keepdims: bool = False) -> Node:
    a = lift(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(sum_(a, axes, keepdims), 1.0 / count)


def concat(nodes: Sequence[Operand], axis: int = 0) -> Node:
    nodes = [lift(n) for n in nodes]
    if not nodes:
        raise ShapeMismatch("concat of an empty sequence", op="concat")
    try:
        out = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {e}", op="concat")
    splits = np.cumsum([n.shape[axis] for n in nodes])[:-1]

    def backward(g):
        for node, piece in zip(nodes, np.split(g, splits, axis=axis)):
            if node.requires_grad:
                node._accumulate(piece)

    return _result(out, tuple(nodes), backward, "concat")


def stack(nodes: Sequence[Operand], axis: int = 0) -> Node:
    nodes = [lift(n) for n in nodes]
    if not nodes:
        raise ShapeMismatch("stack of an empty sequence", op="stack")
    try:
        out = np.stack([n.value for n in nodes], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"stack: {e}", op="stack")

    def backward(g):
        for i, node in enumerate(nodes):
            if node.requires_grad:
                node._accumulate(np.take(g, i, axis=axis))

    return _result(out, tuple(nodes), backward, "stack")


def getitem(a: Operand, index) -> Node:
    a = lift(a)
    items = index if isinstance(index, tuple) else (index,)
    if any(not isinstance(i, (int, slice, type(Ellipsis))) for i in items):
        raise ShapeMismatch("only basic (int/slice) indexing is differentiable", op="slice")
    try:
        out = a.value[index]
    except IndexError as e:
        raise ShapeMismatch(f"slice: {e}", op="slice")

    def backward(g):
        full = np.zeros_like(a.value)
        full[index] = g
        a._accumulate(full)

    return _result(np.array(out), (a,), backward, "slice")


def reshape(a: Operand, shape: Sequence[int]) -> Node:
    a = lift(a)
    try:
        out = a.value.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(f"reshape: {e}", op="reshape")

    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return _result(out, (a,), backward, "reshape")


def broadcast_to(a: Operand, shape: Sequence[int]) -> Node:
    a = lift(a)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.value, shape).copy()
    except ValueError as e:
        raise ShapeMismatch(f"broadcast: {e}", op="broadcast")

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))

    return _result(out, (a,), backward, "broadcast")


def transpose(a: Operand, axes: Sequence[int]) -> Node:
    a = lift(a)
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeMismatch(f"transpose axes {axes} invalid for shape {a.shape}", op="transpose")
    inverse = tuple(np.argsort(axes))

    def backward(g):
        a._accumulate(np.transpose(g, inverse))

    return _result(np.transpose(a.value, axes).copy(), (a,), backward, "transpose")


def swapaxes(a: Operand, axis1: int = -1, axis2: int = -2) -> Node:
    a = lift(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, axes)


# graph traversal

def _topological_order(output: Node) -> List[Node]:
    order: List[Node] = []
    visited = set()
    stack_: List[Tuple[Node, bool]] = [(output, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack_.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack_.append((parent, False))
    return order


def backward(output: Node, params: Optional[Iterable[Node]] = None) -> None:
    """Fill `.grad` of every node reachable from a scalar `output`.

    Accumulators of the reachable graph, and of `params` when given, are reset first,
    so parameters the output does not depend on end with zero gradients.
    """
    if output.value.size != 1:
        raise NonScalarOutput(f"backward needs a scalar output, got shape {output.shape}")
    for p in params or ():
        p.zero_grad()
    if not output.requires_grad:
        return
    order = _topological_order(output)
    for node in order:
        node.zero_grad()
    output._grad = np.ones_like(output.value)
    for node in reversed(order):
        if node._backward is not None and node._grad is not None:
            node._backward(node._grad)
