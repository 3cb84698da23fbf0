"""Dense tensors with define-by-run reverse-mode differentiation.

Every differentiable op appends a record to the active :class:`Graph` (a tape).
``Graph.backward`` walks the tape once in reverse order. There is no implicit
broadcasting: binary elementwise ops require equal shapes, bias rows are added
with :func:`add_bias`, and anything else goes through :func:`broadcast_to`.

    >>> x = Tensor([3.0], requires_grad=True)
    >>> with Graph() as g:
    ...     y = sum_all(mul(x, x))
    >>> g.backward(y)
    >>> float(x.grad[0])
    6.0
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

DEFAULT_DTYPE = np.float64

_node_ids = itertools.count()
_active_graphs: list["Graph"] = []


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class Tensor:
    """An n-d array plus an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else
                         (data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f"
                          else DEFAULT_DTYPE))
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class OpRecord:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Graph:
    """Tape of op records in creation (hence topological) order."""

    records: list[OpRecord] = field(default_factory=list)
    finalized: bool = False

    def __enter__(self) -> "Graph":
        _active_graphs.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_graphs.remove(self)
        self.finalized = True

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

        Leaves keep their existing ``.grad``; calling this twice doubles it.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.pop(rec.output.node_id, None)
            if g is None:
                continue
            in_grads = rec.backward(g)
            for t, tg in zip(rec.inputs, in_grads):
                if tg is None or not t.requires_grad:
                    continue
                prev = grads.get(t.node_id)
                grads[t.node_id] = tg if prev is None else prev + tg
        # whatever remains belongs to leaves (or to the loss itself if it is a leaf)
        leaves = {id(t): t for rec in self.records for t in rec.inputs if t.requires_grad}
        if loss.requires_grad:
            leaves[id(loss)] = loss
        for t in leaves.values():
            g = grads.get(t.node_id)
            if g is None:
                continue
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g

    def __len__(self) -> int:
        return len(self.records)


def backward(graph: Graph, loss: Tensor) -> None:
    graph.backward(loss)


def _wrap(data: np.ndarray, requires_grad: bool) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = requires_grad
    out.node_id = next(_node_ids)
    out.name = None
    return out


def _record(kind: str, inputs: Sequence[Tensor], out_data: np.ndarray, bwd) -> Tensor:
    needs = bool(_active_graphs) and any(t.requires_grad for t in inputs)
    out = _wrap(np.asarray(out_data), needs)
    if needs:
        _active_graphs[-1].records.append(OpRecord(kind, tuple(inputs), out, bwd))
    return out


def custom_op(kind: str, inputs: Sequence[Tensor], out_data: np.ndarray, bwd) -> Tensor:
    """Register an op whose forward value is already computed.

    ``bwd(grad_out)`` must return one gradient (or None) per input.
    """
    return _record(kind, inputs, out_data, bwd)


def _check_same(a: Tensor, b: Tensor, kind: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} differ")


# --- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data

    def bwd(g):
        return (g @ B.T if a.requires_grad else None,
                A.T @ g if b.requires_grad else None)

    return _record("matmul", (a, b), A @ B, bwd)


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum with an explicit output; no repeated index within an operand."""
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for s in (sa, sb):
        if len(set(s)) != len(s):
            raise ValueError(f"einsum: repeated index in {s!r}")
    A, B = a.data, b.data

    def bwd(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, B) if a.requires_grad else None
        gb = np.einsum(f"{out},{sa}->{sb}", g, A) if b.requires_grad else None
        return ga, gb

    return _record("einsum", (a, b), np.einsum(subscripts, A, B), bwd)


# --- elementwise ------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")
    return _record("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")
    return _record("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "mul")
    A, B = a.data, b.data
    return _record("mul", (a, b), A * B, lambda g: (g * B, g * A))


def scale(a: Tensor, c: float) -> Tensor:
    return _record("scale", (a,), a.data * c, lambda g: (g * c,))


def divide(a: Tensor, c: float) -> Tensor:
    """``a / c`` for a constant ``c`` (exact division, not multiplication by 1/c)."""
    if c == 0:
        raise DomainError("divide by zero")
    return _record("divide", (a,), a.data / c, lambda g: (g / c,))


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a bias vector to every row of a 2-d tensor."""
    if a.data.ndim != 2 or bias.data.ndim != 1 or a.shape[1] != bias.shape[0]:
        raise ShapeError(f"add_bias: rows of {a.shape} and bias {bias.shape} do not match")
    return _record("add_bias", (a, bias), a.data + bias.data, lambda g: (g, g.sum(axis=0)))


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data)
    return _record("sigmoid", (a,), y, lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _record("tanh", (a,), y, lambda g: (g * (1.0 - y * y),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _record("exp", (a,), y, lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    x = a.data
    if np.any(x <= 0):
        raise DomainError("log of a non-positive value")
    return _record("log", (a,), np.log(x), lambda g: (g / x,))


def relu(a: Tensor) -> Tensor:
    x = a.data
    return _record("relu", (a,), np.maximum(x, 0.0), lambda g: (g * (x > 0),))


def identity(a: Tensor) -> Tensor:
    return a


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "exp": exp, "log": log, "relu": relu,
          "identity": identity}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(kind: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    if kind in _BINARY:
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        return _BINARY[kind](a, b)
    if kind in _UNARY:
        if b is not None:
            raise ValueError(f"{kind} takes one operand")
        return _UNARY[kind](a)
    raise ValueError(f"unknown elementwise op {kind!r}")


def where(cond: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select from ``a`` where the constant mask ``cond`` holds, else from ``b``."""
    _check_same(a, b, "where")
    cond = np.asarray(cond, dtype=bool)
    if cond.shape != a.shape:
        raise ShapeError(f"where: mask {cond.shape} vs operands {a.shape}")
    zero = np.zeros((), dtype=a.data.dtype)
    return _record("where", (a, b), np.where(cond, a.data, b.data),
                   lambda g: (np.where(cond, g, zero), np.where(cond, zero, g)))


# --- reductions and normalizers --------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _record("sum", (a,), np.asarray(a.data.sum()),
                   lambda g: (np.broadcast_to(g, shape).copy(),))


def sum_axis(a: Tensor, axis: int) -> Tensor:
    shape = a.shape

    def bwd(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _record("sum_axis", (a,), a.data.sum(axis=axis), bwd)


def softmax_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows needs a matrix, got {a.shape}")
    x = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _record("softmax_rows", (a,), y, bwd)


def log_softmax_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"log_softmax_rows needs a matrix, got {a.shape}")
    x = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(x).sum(axis=1, keepdims=True))
    y = x - lse
    p = np.exp(y)
    return _record("log_softmax_rows", (a,), y,
                   lambda g: (g - p * g.sum(axis=1, keepdims=True),))


# --- structural -------------------------------------------------------------

def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if len(tensors) == 1:
        return tensors[0]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.shape for t in tensors]} along axis {axis}") from exc
    return _record("concat", tuple(tensors), out, lambda g: np.split(g, cuts, axis=axis))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    return _record("reshape", (a,), a.data.reshape(shape), lambda g: (g.reshape(old),))


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicit broadcast; size-1 axes of ``a`` are repeated."""
    shape = tuple(shape)
    if a.data.ndim != len(shape):
        raise ShapeError(f"broadcast_to: rank of {a.shape} differs from {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s != t)
    if any(a.shape[i] != 1 for i in axes):
        raise ShapeError(f"broadcast_to: cannot expand {a.shape} to {shape}")
    out = np.broadcast_to(a.data, shape).copy()
    return _record("broadcast_to", (a,), out, lambda g: (g.sum(axis=axes, keepdims=True),))


def index(a: Tensor, key) -> Tensor:
    """``a[key]``; gradients scatter back, summing over repeated positions."""
    shape, dtype = a.shape, a.data.dtype
    fancy = isinstance(key, (np.ndarray, list)) or (
        isinstance(key, tuple) and any(isinstance(k, (np.ndarray, list)) for k in key))

    def bwd(g):
        out = np.zeros(shape, dtype=dtype)
        if fancy:
            np.add.at(out, key, g)
        else:
            out[key] += g
        return (out,)

    return _record("index", (a,), a.data[key], bwd)


def rows(a: Tensor, start: int, stop: int) -> Tensor:
    return index(a, slice(start, stop))


# --- finite differences -----------------------------------------------------

def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-7) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor).

    The floor keeps gradients that are zero up to round-off from producing
    meaningless ratios.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f: Callable[[], float], param: Tensor, eps: float = 1e-5,
                     entries: np.ndarray | None = None) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. ``param.data`` (in place).

    ``entries`` restricts the probe to a subset of flat indices; the others stay 0.
    """
    flat = param.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    idx = range(flat.size) if entries is None else entries
    for i in idx:
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad.reshape(param.shape)


def check_gradients(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                    eps: float = 1e-5) -> list[float]:
    """Max relative error between backprop and central differences, per parameter."""
    for p in params:
        p.zero_grad()
    with Graph() as g:
        loss = loss_fn()
    g.backward(loss)
    errs = []
    for p in params:
        num = numeric_gradient(lambda: loss_fn().item(), p, eps)
        errs.append(float(relative_error(p.grad, num).max()) if p.data.size else 0.0)
    return errs
