"""Finite-difference verification of every parameter group of a tiny model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .data import Sentence
from .model import VNER, Vocabs, make_batch
from .numerics import Graph, numeric_gradient, relative_error

GROUPS = (
    ("word layer", ("word_emb.", "pos_emb.", "chunk_emb.", "chars.char_emb.", "chars.fwd.",
                    "chars.bwd.")),
    ("highway units", ("chars.hw_",)),
    ("char LM heads", ("chars.head_",)),
    ("encoder", ("enc_fwd.", "enc_bwd.")),
    ("attention projection", ("query.",)),
    ("decoder", ("decoder.",)),
    ("CRF", ("crf.",)),
)

TOLERANCE = 1e-4
STEP = 1e-5
ROUNDOFF_SAFETY = 10.0


def error_floor(loss_value: float, eps: float = STEP, tol: float = TOLERANCE) -> float:
    """Gradient magnitude below which central differences are dominated by round-off.

    The difference quotient carries roughly ``machine_eps * |loss| / eps`` of
    noise; entries smaller than ``ROUNDOFF_SAFETY`` times that noise divided by
    ``tol`` are compared on absolute rather than relative error.
    """
    noise = np.finfo(np.float64).eps * max(abs(loss_value), 1.0) / eps
    return ROUNDOFF_SAFETY * noise / tol


@dataclass
class GroupResult:
    name: str
    size: int
    max_rel_error: float
    reached: bool

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= TOLERANCE


def tiny_corpus(seed: int) -> list[Sentence]:
    """Two short sentences over a handful of letters, with POS and BIO columns."""
    rng = np.random.default_rng(seed)
    letters = list("abcdeg")
    out = []
    for n, tags in ((3, ["B-PER", "I-PER", "O"]), (4, ["O", "B-LOC", "O", "B-PER"])):
        words = ["".join(rng.choice(letters, size=rng.integers(1, 4))) for _ in range(n)]
        pos = [str(rng.choice(["N", "V", "E"])) for _ in range(n)]
        out.append(Sentence(words, tags, pos=pos))
    return out


def tiny_config(seed: int = 0, lm_weight: float = 1.0) -> TrainConfig:
    # decoder size differs from 2 * word_hidden so the query projection exists
    return TrainConfig(char_hidden=4, word_hidden=3, char_dim=3, word_dim=4, decoder_hidden=5,
                       feature_dim=2, dropout=0.6, lm_weight=lm_weight, seed=seed,
                       columns="token,pos,tag")


def run_gradcheck(seed: int = 0, lm_weight: float = 1.0, eps: float = STEP) -> list[GroupResult]:
    config = tiny_config(seed, lm_weight)
    corpus = tiny_corpus(seed)
    vocabs = Vocabs.build(corpus, config)
    model = VNER(config, vocabs)
    # perturb the zero-initialized biases and transitions so every term is exercised
    rng = np.random.default_rng(seed + 1)
    for p in model.parameters().values():
        p.data += rng.normal(scale=0.1, size=p.shape)
    batch = make_batch(corpus, vocabs, config)

    def loss():
        # a fresh generator per call keeps the dropout mask fixed across probes
        return model.forward(batch, training=True, rng=np.random.default_rng(seed)).loss

    params = model.trainable()
    model.zero_grad()
    with Graph() as g:
        out = loss()
    g.backward(out)
    floor = error_floor(out.item(), eps)
    results = []
    for group, prefixes in GROUPS:
        names = [k for k in params if k.startswith(prefixes)]
        worst, size, reached = 0.0, 0, False
        for name in names:
            p = params[name]
            num = numeric_gradient(lambda: loss().item(), p, eps)
            worst = max(worst, float(relative_error(p.grad, num, floor).max()))
            size += p.data.size
            reached = reached or bool(np.any(p.grad != 0))
        results.append(GroupResult(group, size, worst, reached))
    return results


def format_report(results: list[GroupResult]) -> str:
    lines = [f"{'group':<22}{'params':>8}{'max rel err':>14}  status"]
    for r in results:
        status = ("PASS" if r.passed else "FAIL") + ("" if r.reached else " (unreached: zero gradient)")
        lines.append(f"{r.name:<22}{r.size:>8d}{r.max_rel_error:>14.3e}  {status}")
    return "\n".join(lines)
