"""Neural building blocks on top of :mod:`vner.numerics`.

All layers work on row-batched 2-d tensors: a single vector of size ``d`` is a
``1 x d`` tensor. Parameters live in plain :class:`~vner.numerics.Tensor`
objects so a model can expose them as a flat ``{path: tensor}`` mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class Layer:
    """Anything holding named parameters."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out[key] = value
            elif isinstance(value, Layer):
                out.update(value.named_parameters(key + "."))
        return out


class LstmCell(Layer):
    """Single-layer LSTM cell, gates packed as [input, forget, output, candidate]."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 forget_bias: float = 1.0):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.W = Tensor(glorot(rng, input_dim + hidden_dim, 4 * hidden_dim), requires_grad=True)
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = forget_bias
        self.b = Tensor(b, requires_grad=True)


def lstm_step(cell: LstmCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    if x.shape[-1] != cell.input_dim or h_prev.shape[-1] != cell.hidden_dim \
            or c_prev.shape != h_prev.shape:
        raise nx.ShapeError(
            f"lstm_step: cell expects input {cell.input_dim} / hidden {cell.hidden_dim}, "
            f"got x {x.shape}, h {h_prev.shape}, c {c_prev.shape}")
    H = cell.hidden_dim
    gates = nx.add_bias(nx.matmul(nx.concat([x, h_prev], axis=1), cell.W), cell.b)
    ifo = nx.sigmoid(nx.index(gates, (slice(None), slice(0, 3 * H))))
    g = nx.tanh(nx.index(gates, (slice(None), slice(3 * H, 4 * H))))
    i = nx.index(ifo, (slice(None), slice(0, H)))
    f = nx.index(ifo, (slice(None), slice(H, 2 * H)))
    o = nx.index(ifo, (slice(None), slice(2 * H, 3 * H)))
    c = nx.add(nx.mul(f, c_prev), nx.mul(i, g))
    h = nx.mul(o, nx.tanh(c))
    return h, c


def run_lstm(cell: LstmCell, inputs: list[Tensor], mask: np.ndarray | None = None,
             reverse: bool = False) -> list[Tensor]:
    """Scan ``cell`` over per-step inputs of shape (batch, d_in).

    ``mask[t, b]`` false means step ``t`` is padding for row ``b``: the state is
    carried through unchanged. Padding sits at the end of each row, so a reverse
    scan keeps the zero initial state until the row's real tokens start.
    Returns hidden states in input order.
    """
    batch = inputs[0].shape[0]
    dtype = inputs[0].dtype
    h = Tensor(np.zeros((batch, cell.hidden_dim), dtype=dtype))
    c = Tensor(np.zeros((batch, cell.hidden_dim), dtype=dtype))
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    out: list[Tensor | None] = [None] * len(inputs)
    for t in order:
        h_new, c_new = lstm_step(cell, inputs[t], h, c)
        if mask is not None and not mask[t].all():
            keep = np.broadcast_to(mask[t][:, None], h_new.shape)
            h_new = nx.where(keep, h_new, h)
            c_new = nx.where(keep, c_new, c)
        h, c = h_new, c_new
        out[t] = h
    return out


class HighwayUnit(Layer):
    """Gated transform ``t * phi(W_H x + b_H)`` with ``t = sigmoid(W_T x + b_T)``.

    With ``carry=True`` the textbook ``+ (1 - t) * x`` term is added.
    """

    def __init__(self, dim: int, rng: np.random.Generator, activation: str = "tanh",
                 carry: bool = False):
        if activation not in ("tanh", "relu", "identity"):
            raise ValueError(f"unsupported highway activation {activation!r}")
        self.dim = dim
        self.activation = activation
        self.carry = carry
        self.W_H = Tensor(glorot(rng, dim, dim), requires_grad=True)
        self.b_H = Tensor(np.zeros(dim), requires_grad=True)
        self.W_T = Tensor(glorot(rng, dim, dim), requires_grad=True)
        self.b_T = Tensor(np.zeros(dim), requires_grad=True)

    def gate(self, x: Tensor) -> Tensor:
        return nx.sigmoid(nx.add_bias(nx.matmul(x, self.W_T), self.b_T))


def highway(unit: HighwayUnit, x: Tensor) -> Tensor:
    if x.shape[-1] != unit.dim:
        raise nx.ShapeError(f"highway: unit of size {unit.dim} got input {x.shape}")
    t = unit.gate(x)
    out = nx.mul(t, nx.elementwise(unit.activation, nx.add_bias(nx.matmul(x, unit.W_H), unit.b_H)))
    if unit.carry:
        ones = Tensor(np.ones(t.shape, dtype=t.dtype))
        out = nx.add(out, nx.mul(nx.sub(ones, t), x))
    return out


class Linear(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.W = Tensor(glorot(rng, in_dim, out_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = nx.matmul(x, self.W)
        return nx.add_bias(y, self.b) if self.b is not None else y


@dataclass
class EmbeddingTable(Layer):
    weight: Tensor
    trainable: bool = True

    @classmethod
    def random(cls, vocab_size: int, dim: int, rng: np.random.Generator,
               bound: float | None = None, trainable: bool = True) -> "EmbeddingTable":
        bound = np.sqrt(3.0 / dim) if bound is None else bound
        w = rng.uniform(-bound, bound, size=(vocab_size, dim))
        return cls(Tensor(w, requires_grad=trainable), trainable)

    @property
    def vocab_size(self) -> int:
        return self.weight.shape[0]

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def freeze(self) -> None:
        self.trainable = False
        self.weight.requires_grad = False
        self.weight.grad = None


def embed(table: EmbeddingTable, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.vocab_size):
        raise IndexError(f"embedding id out of range [0, {table.vocab_size})")
    return nx.index(table.weight, ids)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | int | None = None) -> Tensor:
    """Inverted dropout; the identity outside training or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return nx.mul(x, Tensor(keep))
