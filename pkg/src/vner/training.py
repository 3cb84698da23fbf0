"""Joint objective, Adam, and the epoch loop with dev-F1 model selection."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import Sentence
from .evaluation import Report, score
from .layers import EmbeddingTable
from .model import VNER, Batch, Forward, Vocabs, make_batch, sentence_labels
from .numerics import Graph, ShapeError, Tensor

log = logging.getLogger(__name__)


def joint_loss(model: VNER, batch: Batch, training: bool = False,
               rng: np.random.Generator | None = None) -> Forward:
    """Mean over sentences of CRF nll + lm_weight * (forward LM nll + backward LM nll)."""
    return model.forward(batch, training, rng)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place bias-corrected Adam update of every array in ``params``."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam: gradient {g.shape} for parameter {name} of shape {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        elif m.shape != p.shape:
            raise ShapeError(f"adam: state {m.shape} for parameter {name} of shape {p.shape}")
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        for g in grads:
            g *= max_norm / norm
    return norm


def evaluate(model: VNER, corpus: Sequence[Sentence], batch_size: int = 64) -> Report:
    pred = model.predict(corpus, batch_size)
    if model.config.nested:
        gold = [[s.tags, s.tags2] for s in corpus]
        return score(gold, pred, nested=True)
    return score([s.tags for s in corpus], [p[0] for p in pred])


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    model: VNER
    history: list[dict]


def batches(corpus: Sequence[Sentence], batch_size: int, rng: np.random.Generator) -> list[list[Sentence]]:
    """Shuffled mini-batches of similar-length sentences.

    Sentences are shuffled, sorted by length inside pools of 20 batches, cut
    into batches, and the batch order is shuffled again.
    """
    order = rng.permutation(len(corpus))
    pool = 20 * batch_size
    groups = []
    for i in range(0, len(order), pool):
        chunk = sorted(order[i:i + pool], key=lambda j: len(corpus[j]))
        groups += [chunk[k:k + batch_size] for k in range(0, len(chunk), batch_size)]
    return [[corpus[j] for j in groups[g]] for g in rng.permutation(len(groups))]


def check_inventory(vocabs: Vocabs, corpus: Sequence[Sentence], config: TrainConfig, split: str) -> None:
    known = set(vocabs.labels)
    for i, s in enumerate(corpus):
        for lab in sentence_labels(s, config.nested) or []:
            if lab not in known:
                raise ValueError(f"{split} sentence {i}: tag {lab!r} never occurs in training data")


def train(train_corpus: Sequence[Sentence], dev_corpus: Sequence[Sentence], config: TrainConfig,
          embeddings: Callable[[Vocabs], EmbeddingTable] | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Train with Adam and keep the parameters of the best dev-F1 epoch.

    ``embeddings`` builds a pretrained table once the word vocabulary is known.
    Stops after ``config.epochs`` or ``config.patience`` epochs without a dev
    improvement.
    """
    if not train_corpus:
        raise ValueError("empty training corpus")
    if not dev_corpus:
        raise ValueError("empty dev corpus")
    vocabs = Vocabs.build(train_corpus, config)
    check_inventory(vocabs, dev_corpus, config, "dev")
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])
    model = VNER(config, vocabs, word_embeddings=embeddings(vocabs) if embeddings else None)
    params = model.trainable()
    state = AdamState()
    history: list[dict] = []
    best = Checkpoint.from_model(model, 0, -1.0)
    stale = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        losses = []
        for group in batches(train_corpus, config.batch_size, shuffle_rng):
            batch = make_batch(group, vocabs, config)
            model.zero_grad()
            with Graph() as g:
                out = model.forward(batch, training=True, rng=dropout_rng)
            g.backward(out.loss)
            grads = {k: p.grad for k, p in params.items()}
            clip_grad_norm(list(grads.values()), config.clip_norm)
            adam_step({k: p.data for k, p in params.items()}, grads, state, config.learning_rate)
            losses.append(out.loss.item())
        report = evaluate(model, dev_corpus)
        row = {"epoch": epoch, "loss": float(np.mean(losses)), "dev_precision": report.precision,
               "dev_recall": report.recall, "dev_f1": report.f1}
        history.append(row)
        log.info("epoch %d  loss %.4f  dev P %.2f R %.2f F1 %.2f  (%.1fs)", epoch, row["loss"],
                 100 * report.precision, 100 * report.recall, 100 * report.f1,
                 time.perf_counter() - t0)
        if on_epoch:
            on_epoch(row)
        if report.f1 > best.best_dev_f1:
            best = Checkpoint.from_model(model, epoch, report.f1)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                log.info("no dev improvement for %d epochs; stopping", stale)
                break
    best.history = history
    final = best.build_model()
    return TrainResult(best, final, history)
