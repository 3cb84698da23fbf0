"""Character language-model word representations.

A sentence is spelled out as one character stream with a reserved SPACE
marker between words and at both ends::

    _ w o r d 1 _ w o r d 2 _

A forward and a backward character LSTM run over the stream. For word ``i``
the forward state is read at the word's last character and the backward state
at the marker just before the word. Each stream feeds two highway units: one
toward the word-level LM head, one toward the word vector.

Batched tensors are time-major: row ``t * B + b`` belongs to step ``t`` of
sentence ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numerics as nx
from .data import Vocabulary
from .layers import EmbeddingTable, HighwayUnit, Layer, Linear, LstmCell, dropout, embed, highway, run_lstm
from .numerics import Tensor

SPACE = "<sp>"
LM_UNK = "<unk-lm>"
LM_BOUNDARY = "</s>"


@dataclass
class CharSequence:
    ids: list[int]
    boundaries: list[tuple[int, int]]  # inclusive (start, end) character positions per word

    def __post_init__(self):
        prev_end = -1
        for s, e in self.boundaries:
            if not (prev_end < s <= e < len(self.ids)):
                raise ValueError(f"bad word boundary ({s}, {e}) in a stream of {len(self.ids)}")
            prev_end = e


def spell(tokens: Sequence[str], char_vocab: Vocabulary) -> CharSequence:
    """Character ids with SPACE markers around every word."""
    if not tokens:
        raise ValueError("cannot spell an empty sentence")
    space = char_vocab.index(SPACE)
    ids = [space]
    bounds = []
    for tok in tokens:
        if not tok:
            raise ValueError("empty token")
        start = len(ids)
        ids.extend(char_vocab.index(ch) for ch in tok)
        bounds.append((start, len(ids) - 1))
        ids.append(space)
    return CharSequence(ids, bounds)


class WordLayer(Layer):
    """Parameters of the character LM side: embeddings, two LSTMs, four highways, two heads."""

    def __init__(self, n_chars: int, char_dim: int, char_hidden: int, lm_vocab_size: int,
                 rng: np.random.Generator, highway_activation: str = "tanh",
                 highway_carry: bool = False):
        self.char_emb = EmbeddingTable.random(n_chars, char_dim, rng)
        self.fwd = LstmCell(char_dim, char_hidden, rng)
        self.bwd = LstmCell(char_dim, char_hidden, rng)
        kw = dict(activation=highway_activation, carry=highway_carry)
        self.hw_fwd_lm = HighwayUnit(char_hidden, rng, **kw)
        self.hw_fwd_word = HighwayUnit(char_hidden, rng, **kw)
        self.hw_bwd_lm = HighwayUnit(char_hidden, rng, **kw)
        self.hw_bwd_word = HighwayUnit(char_hidden, rng, **kw)
        self.head_fwd = Linear(char_hidden, lm_vocab_size, rng)
        self.head_bwd = Linear(char_hidden, lm_vocab_size, rng)

    @property
    def hidden_dim(self) -> int:
        return self.fwd.hidden_dim


def run_char_lm(layer: WordLayer, char_ids: np.ndarray, char_mask: np.ndarray | None = None
                ) -> tuple[list[Tensor], list[Tensor]]:
    """Forward and backward character LSTM states, one ``(B, H)`` tensor per position.

    ``char_ids`` is ``(C, B)``; a 1-d array is treated as a single sentence.
    """
    char_ids = np.asarray(char_ids)
    if char_ids.ndim == 1:
        char_ids = char_ids[:, None]
    if char_ids.size == 0:
        raise ValueError("empty character sequence")
    C, B = char_ids.shape
    x = embed(layer.char_emb, char_ids.reshape(-1))
    steps = [nx.rows(x, t * B, (t + 1) * B) for t in range(C)]
    fwd = run_lstm(layer.fwd, steps, char_mask)
    bwd = run_lstm(layer.bwd, steps, char_mask, reverse=True)
    return fwd, bwd


def highway_taps(layer: WordLayer, fwd: list[Tensor], bwd: list[Tensor],
                 fwd_index: np.ndarray, bwd_index: np.ndarray) -> dict[str, Tensor]:
    """Read LSTM states at word boundaries and pass them through the four highway units.

    ``fwd_index``/``bwd_index`` address rows of the time-major stacked states
    (``position * B + b``).
    """
    n_rows = len(fwd) * fwd[0].shape[0]
    for idx in (fwd_index, bwd_index):
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
            raise IndexError(f"word boundary outside the {n_rows} character states")
    of = nx.index(nx.concat(fwd, axis=0), np.asarray(fwd_index))
    ob = nx.index(nx.concat(bwd, axis=0), np.asarray(bwd_index))
    return {
        "fwd_lm": highway(layer.hw_fwd_lm, of),
        "fwd_word": highway(layer.hw_fwd_word, of),
        "bwd_lm": highway(layer.hw_bwd_lm, ob),
        "bwd_word": highway(layer.hw_bwd_word, ob),
    }


def head_nll(head: Linear, states: Tensor, targets: np.ndarray) -> Tensor:
    """Summed ``-log softmax(head(states))[target]`` over rows."""
    targets = np.asarray(targets, dtype=np.int64)
    n_out = head.W.shape[1]
    if targets.size and (targets.min() < 0 or targets.max() >= n_out):
        raise IndexError(f"LM target outside the {n_out}-word LM vocabulary")
    logp = nx.log_softmax_rows(head(states))
    return nx.scale(nx.sum_all(nx.index(logp, (np.arange(len(targets)), targets))), -1.0)


def lm_loss(layer: WordLayer, fwd_lm: Tensor, bwd_lm: Tensor,
            fwd_targets: np.ndarray, bwd_targets: np.ndarray) -> tuple[Tensor, Tensor]:
    """Forward LM predicts word i+1 from word i's tap; backward predicts word i-1."""
    return (head_nll(layer.head_fwd, fwd_lm, fwd_targets),
            head_nll(layer.head_bwd, bwd_lm, bwd_targets))


def lm_targets(word_lm_ids: Sequence[int], boundary_id: int) -> tuple[list[int], list[int]]:
    """Next-word and previous-word targets, with the boundary id past either end."""
    ids = list(word_lm_ids)
    return ids[1:] + [boundary_id], [boundary_id] + ids[:-1]


def word_vectors(word_emb: Tensor, fwd_word: Tensor, bwd_word: Tensor,
                 features: Sequence[Tensor] = (), rate: float = 0.0, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
    """Row-wise ``[E_i; fwd tap_i; bwd tap_i; features...]``, then dropout."""
    parts = [word_emb, fwd_word, bwd_word, *features]
    n = parts[0].shape[0]
    if any(p.shape[0] != n for p in parts):
        raise nx.ShapeError(f"word streams disagree in length: {[p.shape[0] for p in parts]}")
    return dropout(nx.concat(parts, axis=1), rate, training, rng)
