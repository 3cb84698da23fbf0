"""Linear-chain CRF: exact log-partition, negative log-likelihood and Viterbi.

Scores live in a log-potential tensor ``L`` of shape ``(T, B, Y + 1, Y)``:
``L[t, b, i, j]`` is the log potential of label ``j`` at step ``t`` following
label ``i``. Row ``Y`` stands for the virtual START label and is only read at
``t = 0``. A per-label ``stop`` vector closes every sequence. The transition
parameter is the full ``(Y + 2) x (Y + 2)`` matrix including START and STOP;
rows and columns that can never fire simply receive zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numerics as nx
from .data import JOINT_SEP, bio_allowed, bio_inventory
from .layers import Layer, glorot
from .numerics import Tensor

DEFAULT_TYPES = ("LOC", "ORG", "PER", "MISC")
ILLEGAL_SCORE = -1e4


def _allowed(prev: str | None, tag: str) -> bool:
    try:
        return _allowed_bio(prev, tag)
    except ValueError:  # labels outside the BIO scheme are unconstrained
        return True


def _allowed_bio(prev: str | None, tag: str) -> bool:
    if JOINT_SEP in tag:
        halves = tag.split(JOINT_SEP)
        prevs = prev.split(JOINT_SEP) if prev is not None else [None] * len(halves)
        return all(bio_allowed(p, t) for p, t in zip(prevs, halves))
    return bio_allowed(prev, tag)


@dataclass
class TagScheme:
    """Label inventory plus which transitions are legal.

    Joint labels (``L1+L2``) are legal iff each layer is legal on its own.
    """

    labels: list[str]

    @classmethod
    def from_types(cls, types: Sequence[str] = DEFAULT_TYPES) -> "TagScheme":
        return cls(bio_inventory(types))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}") from None

    def legality(self) -> np.ndarray:
        """Boolean ``(Y + 1, Y)`` matrix; the last row is START."""
        Y = len(self.labels)
        ok = np.zeros((Y + 1, Y), dtype=bool)
        for j, tag in enumerate(self.labels):
            for i, prev in enumerate(self.labels):
                ok[i, j] = _allowed(prev, tag)
            ok[Y, j] = _allowed(None, tag)
        return ok


class Crf(Layer):
    """CRF parameters over inputs of size ``in_dim``.

    Default scoring is emission ``(W z + b)[y]`` plus transition ``trans[y', y]``.
    ``full_pairwise`` replaces the emission with a separate weight vector per
    label pair, ``W[y', y] . z + trans[y', y]``.
    """

    def __init__(self, in_dim: int, scheme: TagScheme, rng: np.random.Generator,
                 full_pairwise: bool = False):
        self.scheme = scheme
        self.full_pairwise = full_pairwise
        Y = len(scheme)
        self.n_labels = Y
        if full_pairwise:
            self.W = Tensor(glorot(rng, in_dim, Y, shape=(in_dim, (Y + 1) * Y)), requires_grad=True)
            self.b = None
        else:
            self.W = Tensor(glorot(rng, in_dim, Y), requires_grad=True)
            self.b = Tensor(np.zeros(Y), requires_grad=True)
        self.trans = Tensor(np.zeros((Y + 2, Y + 2)), requires_grad=True)
        self._legal = scheme.legality()

    @property
    def start(self) -> int:
        return self.n_labels

    @property
    def stop(self) -> int:
        return self.n_labels + 1

    def potentials(self, z: Tensor, steps: int, batch: int,
                   constrained: bool = False) -> tuple[Tensor, Tensor]:
        """Log potentials ``(T, B, Y + 1, Y)`` and stop scores ``(Y,)`` from time-major ``z``."""
        Y = self.n_labels
        shape = (steps, batch, Y + 1, Y)
        rows = np.r_[np.arange(Y), self.start]
        trans = nx.index(self.trans, (rows[:, None], np.arange(Y)[None, :]))
        trans = nx.broadcast_to(nx.reshape(trans, (1, 1, Y + 1, Y)), shape)
        if self.full_pairwise:
            unary = nx.reshape(nx.matmul(z, self.W), shape)
        else:
            emit = nx.add_bias(nx.matmul(z, self.W), self.b)
            unary = nx.broadcast_to(nx.reshape(emit, (steps, batch, 1, Y)), shape)
        L = nx.add(unary, trans)
        if constrained:
            penalty = np.where(self._legal, 0.0, ILLEGAL_SCORE).astype(L.dtype)
            L = nx.add(L, Tensor(np.broadcast_to(penalty, shape).copy()))
        stop = nx.index(self.trans, (np.arange(Y), self.stop))
        return L, stop


# --- log-space dynamic programs ----------------------------------------------

def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def _alphas(L: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    T, B, _, Y = L.shape
    alpha = np.empty((T, B, Y), dtype=L.dtype)
    alpha[0] = L[0, :, Y, :]
    for t in range(1, T):
        new = _lse(alpha[t - 1][:, :, None] + L[t, :, :Y, :], axis=1)
        alpha[t] = np.where((t < lengths)[:, None], new, alpha[t - 1])
    return alpha


def _betas(L: np.ndarray, stop: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    T, B, _, Y = L.shape
    beta = np.empty((T, B, Y), dtype=L.dtype)
    beta[T - 1] = stop
    for t in range(T - 2, -1, -1):
        new = _lse(L[t + 1, :, :Y, :] + beta[t + 1][:, None, :], axis=2)
        beta[t] = np.where((t + 1 < lengths)[:, None], new, stop)
    return beta


def log_partition_batch(L: Tensor, stop: Tensor, lengths: np.ndarray) -> Tensor:
    """Per-sentence log Z by the forward algorithm; backward yields edge marginals."""
    lengths = np.asarray(lengths)
    Ld, sd = L.data, stop.data
    T, B, _, Y = Ld.shape
    alpha = _alphas(Ld, lengths)
    last = alpha[lengths - 1, np.arange(B)]
    logz = _lse(last + sd, axis=1)

    def bwd(g):
        beta = _betas(Ld, sd, lengths)
        gL = np.zeros_like(Ld)
        w = g[:, None]
        gL[0, :, Y, :] = np.exp(Ld[0, :, Y, :] + beta[0] - logz[:, None]) * w
        for t in range(1, T):
            live = (t < lengths)[:, None, None]
            m = np.exp(alpha[t - 1][:, :, None] + Ld[t, :, :Y, :] + beta[t][:, None, :]
                       - logz[:, None, None])
            gL[t, :, :Y, :] = np.where(live, m * w[:, :, None], 0.0)
        gstop = (np.exp(last + sd - logz[:, None]) * w).sum(axis=0)
        return gL, gstop

    return nx.custom_op("crf_log_partition", (L, stop), logz, bwd)


def gold_score_batch(L: Tensor, stop: Tensor, tags: np.ndarray, lengths: np.ndarray) -> Tensor:
    """Summed unnormalized log score of the given label paths. ``tags`` is (T, B)."""
    Y = L.shape[3]
    ts, bs, prev, cur = [], [], [], []
    for b, n in enumerate(lengths):
        for t in range(n):
            ts.append(t)
            bs.append(b)
            prev.append(Y if t == 0 else tags[t - 1, b])
            cur.append(tags[t, b])
    key = tuple(np.asarray(a, dtype=np.int64) for a in (ts, bs, prev, cur))
    last = np.asarray([tags[n - 1, b] for b, n in enumerate(lengths)], dtype=np.int64)
    return nx.add(nx.sum_all(nx.index(L, key)), nx.sum_all(nx.index(stop, last)))


def viterbi_path(L: np.ndarray, stop: np.ndarray, n: int,
                 legal: np.ndarray | None = None) -> tuple[list[int], float]:
    """Best path for one sentence from ``L`` of shape ``(T, Y + 1, Y)``.

    Ties resolve to the lexicographically smallest label sequence: best suffix
    scores are computed right to left, then labels are chosen left to right
    taking the lowest index among the maximizers. ``legal`` excludes
    transitions outright.
    """
    L = L[:n].astype(np.float64)
    if legal is not None:
        L = np.where(legal[None], L, -np.inf)
    Y = L.shape[2]
    suffix = np.empty((n, Y))
    suffix[n - 1] = stop
    for t in range(n - 2, -1, -1):
        suffix[t] = (L[t + 1, :Y, :] + suffix[t + 1][None, :]).max(axis=1)
    first = L[0, Y, :] + suffix[0]
    path = [int(np.argmax(first))]
    for t in range(1, n):
        path.append(int(np.argmax(L[t, path[-1], :] + suffix[t])))
    return path, float(first.max())


# --- single-sentence API -------------------------------------------------------

def _label_ids(crf: Crf, y: Sequence) -> np.ndarray:
    return np.asarray([crf.scheme.index(l) if isinstance(l, str) else int(l) for l in y],
                      dtype=np.int64)


def _single(z: Tensor, crf: Crf, constrained: bool = False):
    if z.data.ndim != 2 or z.shape[0] == 0:
        raise nx.ShapeError(f"expected a non-empty (n, d) sequence, got {z.shape}")
    return crf.potentials(z, z.shape[0], 1, constrained)


def score_sequence(z: Tensor, y: Sequence, crf: Crf) -> Tensor:
    if len(y) != z.shape[0]:
        raise ValueError(f"{len(y)} labels for {z.shape[0]} positions")
    ids = _label_ids(crf, y)
    if ids.size and (ids.min() < 0 or ids.max() >= crf.n_labels):
        raise KeyError(f"label id out of range in {list(y)}")
    L, stop = _single(z, crf)
    return gold_score_batch(L, stop, ids[:, None], np.array([len(ids)]))


def log_partition(z: Tensor, crf: Crf, constrained: bool = False) -> Tensor:
    L, stop = _single(z, crf, constrained)
    return nx.sum_all(log_partition_batch(L, stop, np.array([z.shape[0]])))


def nll(z: Tensor, y: Sequence, crf: Crf) -> Tensor:
    return nx.sub(log_partition(z, crf), score_sequence(z, y, crf))


def viterbi(z: Tensor, crf: Crf, constrained: bool = True) -> tuple[list[int], float]:
    L, stop = _single(z, crf)
    legal = crf._legal if constrained else None
    return viterbi_path(L.data[:, 0], stop.data, z.shape[0], legal)
