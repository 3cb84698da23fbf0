"""Exact-match entity scoring over BIO tag sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .data import split_tag


@dataclass(frozen=True, order=True)
class EntitySpan:
    start: int
    end: int  # inclusive
    type: str
    level: int = 1


def extract_spans(tags: Sequence[str], level: int = 1) -> set[EntitySpan]:
    """Maximal ``B-X (I-X)*`` runs. An orphan ``I-X`` opens a new span, as on repair."""
    spans = set()
    start = kind = None
    for i, tag in enumerate(tags):
        prefix, t = split_tag(tag)
        if prefix == "I" and kind == t:
            continue
        if kind is not None:
            spans.add(EntitySpan(start, i - 1, kind, level))
            start = kind = None
        if prefix != "O":
            start, kind = i, t
    if kind is not None:
        spans.add(EntitySpan(start, len(tags) - 1, kind, level))
    return spans


def render_bio(spans, length: int) -> list[str]:
    tags = ["O"] * length
    for sp in sorted(spans):
        tags[sp.start] = f"B-{sp.type}"
        for i in range(sp.start + 1, sp.end + 1):
            tags[i] = f"I-{sp.type}"
    return tags


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class TypeScore:
    correct: int = 0
    predicted: int = 0
    gold: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.correct, self.predicted, self.gold)[0]

    @property
    def recall(self) -> float:
        return _prf(self.correct, self.predicted, self.gold)[1]

    @property
    def f1(self) -> float:
        return _prf(self.correct, self.predicted, self.gold)[2]


@dataclass
class Report:
    per_type: dict[str, TypeScore] = field(default_factory=dict)
    micro: TypeScore = field(default_factory=TypeScore)

    @property
    def precision(self) -> float:
        return self.micro.precision

    @property
    def recall(self) -> float:
        return self.micro.recall

    @property
    def f1(self) -> float:
        return self.micro.f1

    def to_dict(self) -> dict:
        def row(s: TypeScore):
            return {"precision": s.precision, "recall": s.recall, "f1": s.f1,
                    "correct": s.correct, "predicted": s.predicted, "support": s.gold}
        return {"micro": row(self.micro),
                "types": {k: row(v) for k, v in sorted(self.per_type.items())}}

    def format(self) -> str:
        lines = [f"{'type':<8}{'precision':>10}{'recall':>10}{'F1':>10}{'support':>10}"]
        for name, s in [*sorted(self.per_type.items()), ("micro", self.micro)]:
            lines.append(f"{name:<8}{100 * s.precision:>10.2f}{100 * s.recall:>10.2f}"
                         f"{100 * s.f1:>10.2f}{s.gold:>10d}")
        return "\n".join(lines)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def score(gold: Sequence[Sequence[str]] | Sequence[Sequence[Sequence[str]]],
          pred: Sequence[Sequence[str]] | Sequence[Sequence[Sequence[str]]],
          nested: bool = False) -> Report:
    """Entity precision/recall/F1 over a corpus.

    ``gold[s]`` and ``pred[s]`` are tag sequences, or with ``nested=True`` lists
    of tag layers whose spans are pooled (a span's level is part of its identity).
    """
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} sentences, predictions {len(pred)}")
    report = Report()
    for s, (g_sent, p_sent) in enumerate(zip(gold, pred)):
        g_layers = g_sent if nested else [g_sent]
        p_layers = p_sent if nested else [p_sent]
        if len(g_layers) != len(p_layers):
            raise ValueError(f"sentence {s}: {len(g_layers)} gold layers vs {len(p_layers)} predicted")
        for level, (g, p) in enumerate(zip(g_layers, p_layers), 1):
            if len(g) != len(p):
                raise ValueError(f"sentence {s}: {len(g)} gold tags vs {len(p)} predicted")
            gs, ps = extract_spans(g, level), extract_spans(p, level)
            for sp in gs:
                report.per_type.setdefault(sp.type, TypeScore()).gold += 1
            for sp in ps:
                report.per_type.setdefault(sp.type, TypeScore()).predicted += 1
            for sp in gs & ps:
                report.per_type[sp.type].correct += 1
    m = report.micro
    for ts in report.per_type.values():
        m.correct += ts.correct
        m.predicted += ts.predicted
        m.gold += ts.gold
    return report
