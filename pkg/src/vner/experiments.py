"""Scaled-down training runs on the generated corpora."""

from __future__ import annotations

from dataclasses import dataclass

from .config import TrainConfig
from .synthetic import long_range_corpus, nested_corpus, pattern_corpus
from .training import TrainResult, evaluate, train

# Published sizes with hidden dims cut to 50 and batches to 16.
SCALED = dict(char_hidden=50, word_hidden=50, batch_size=16, epochs=30)


def scaled_config(**overrides) -> TrainConfig:
    return TrainConfig(**{**SCALED, **overrides})


@dataclass
class RunSummary:
    best_dev_f1: float
    best_epoch: int
    epochs_run: int
    result: TrainResult


def run(train_corpus, dev_corpus, config: TrainConfig) -> RunSummary:
    result = train(train_corpus, dev_corpus, config)
    ck = result.checkpoint
    return RunSummary(ck.best_dev_f1, ck.epoch, len(result.history), result)


def pattern_run(n_train: int = 1000, n_dev: int = 200, seed: int = 1, **overrides) -> RunSummary:
    return run(pattern_corpus(n_train, seed=100 + seed), pattern_corpus(n_dev, seed=200 + seed),
               scaled_config(seed=seed, **overrides))


def long_range_run(attention: bool, seed: int, n_train: int = 400, n_dev: int = 100,
                   **overrides) -> RunSummary:
    # the corpus is fixed; only the model seed varies
    return run(long_range_corpus(n_train, seed=300), long_range_corpus(n_dev, seed=400),
               scaled_config(seed=seed, attention=attention, **overrides))


def nested_run(n_train: int = 600, n_dev: int = 150, seed: int = 1, **overrides) -> RunSummary:
    return run(nested_corpus(n_train, seed=500), nested_corpus(n_dev, seed=600),
               scaled_config(seed=seed, nested=True, columns="token,tag,tag2", **overrides))


def dev_f1(result: TrainResult, dev_corpus) -> float:
    return evaluate(result.model, dev_corpus).f1
