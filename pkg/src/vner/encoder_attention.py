"""BiLSTM encoder, dot-product attention and the attentive LSTM decoder."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .layers import Linear, LstmCell, lstm_step, run_lstm
from .numerics import Tensor

MASKED_SCORE = -1e30


@dataclass
class EncoderStates:
    forward: list[Tensor]
    backward: list[Tensor]
    outputs: Tensor  # (T * B, 2H), time-major
    steps: int
    batch: int
    mask: np.ndarray | None = None  # (T, B); None = no padding

    @property
    def dim(self) -> int:
        return self.outputs.shape[1]

    def step(self, t: int) -> Tensor:
        return nx.rows(self.outputs, t * self.batch, (t + 1) * self.batch)

    def stacked(self) -> Tensor:
        return nx.reshape(self.outputs, (self.steps, self.batch, self.dim))

    def with_outputs(self, outputs: Tensor) -> "EncoderStates":
        return EncoderStates(self.forward, self.backward, outputs, self.steps, self.batch, self.mask)


@dataclass
class AttentionStep:
    scores: Tensor   # (B, T)
    weights: Tensor  # (B, T)
    context: Tensor  # (B, 2H)


@dataclass
class DecoderOutput:
    z: Tensor  # (T * B, D), time-major
    hidden: list[Tensor]
    attention: list[AttentionStep] = field(default_factory=list)


def encode(x: Tensor, steps: int, fwd: LstmCell, bwd: LstmCell,
           mask: np.ndarray | None = None) -> EncoderStates:
    """Run both directions over time-major rows of ``x`` and concatenate per token."""
    if steps == 0 or x.shape[0] == 0:
        raise ValueError("cannot encode an empty sequence")
    batch = x.shape[0] // steps
    inputs = [nx.rows(x, t * batch, (t + 1) * batch) for t in range(steps)]
    hf = run_lstm(fwd, inputs, mask)
    hb = run_lstm(bwd, inputs, mask, reverse=True)
    out = nx.concat([nx.concat(hf, axis=0), nx.concat(hb, axis=0)], axis=1)
    return EncoderStates(hf, hb, out, steps, batch, mask)


def attend(query: Tensor, memory: Tensor, mask: np.ndarray | None = None) -> AttentionStep:
    """Dot-product attention of ``query`` (B, D) over ``memory`` (T, B, D).

    Masked-out (padding) positions get zero weight.
    """
    if query.data.ndim == 1:
        query = nx.reshape(query, (1, query.shape[0]))
    if memory.data.ndim == 2:
        memory = nx.reshape(memory, (memory.shape[0], 1, memory.shape[1]))
    if query.shape[1] != memory.shape[2] or query.shape[0] != memory.shape[1]:
        raise nx.ShapeError(f"attend: query {query.shape} does not fit memory {memory.shape}")
    scores = nx.einsum("tbd,bd->bt", memory, query)
    logits = scores
    if mask is not None and not mask.all():
        bias = np.where(mask.T, 0.0, MASKED_SCORE).astype(scores.dtype)
        logits = nx.add(scores, Tensor(bias))
    weights = nx.softmax_rows(logits)
    context = nx.einsum("bt,tbd->bd", weights, memory)
    return AttentionStep(scores, weights, context)


def decode_sequence(enc: EncoderStates, cell: LstmCell, query_proj: Linear | None,
                    attention: bool = True) -> DecoderOutput:
    """Decoder LSTM fed ``[h_e_t; h_d_{t-1}; c_t]`` with ``c_t`` attended by ``h_d_{t-1}``.

    Without attention the input is ``[h_e_t; h_d_{t-1}]``.
    """
    B, D = enc.batch, cell.hidden_dim
    dtype = enc.outputs.dtype
    h = Tensor(np.zeros((B, D), dtype=dtype))
    c = Tensor(np.zeros((B, D), dtype=dtype))
    memory = enc.stacked() if attention else None
    hidden, steps = [], []
    for t in range(enc.steps):
        parts = [enc.step(t), h]
        if attention:
            q = query_proj(h) if query_proj is not None else h
            att = attend(q, memory, enc.mask)
            steps.append(att)
            parts.append(att.context)
        h, c = lstm_step(cell, nx.concat(parts, axis=1), h, c)
        hidden.append(h)
    return DecoderOutput(nx.concat(hidden, axis=0), hidden, steps)
