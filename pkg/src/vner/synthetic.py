"""Generated corpora whose entities follow fixed lexical patterns.

``pattern_corpus`` draws from a closed 60-word vocabulary:

* a person name from a closed list always follows a title word (``ông``, ``bà`` ...);
* a location is any word ending in ``giang`` (no list is needed to spot it);
* an organization is ``công_ty`` followed by one company word.

``long_range_corpus`` puts a cue word at the start of the sentence and the
entity six or more tokens later; the same name is PER after ``ông`` and LOC
after ``tỉnh``. ``nested_corpus`` carries two tag layers in the style of
joint-tag nesting: a titled person is tagged on level 2 only, and a company
named after a location is ORG on level 1 with the LOC inside on level 2.
"""

from __future__ import annotations

import numpy as np

from .data import Sentence

FILLERS = ["hôm_nay", "đã", "đến", "và", "với", "của", "cho", "người", "nói", "rằng", "làm",
           "việc", "tại", "ở", "một", "những", "các", "được", "sẽ", "không", "có", "đi", "về",
           "năm", "mới", "lớn", "nhỏ", "gặp", "thăm", "họp"]
TITLES = ["ông", "bà", "anh", "chị"]
NAMES = ["Hùng", "Lan", "Minh", "Tuấn", "Mai", "Dũng", "Hoa", "Nam"]
PLACES = ["Tiềngiang", "Hậugiang", "Kiêngiang", "Bắcgiang", "Hàgiang", "Sôngiang",
          "Longgiang", "Trànggiang", "Cầngiang", "Đônggiang"]
ORG_HEAD = "công_ty"
COMPANIES = ["Vina", "Saomai", "Hoàphát", "Thànhcông", "Đạiviệt"]
PUNCT = [".", ","]

VOCABULARY = FILLERS + TITLES + NAMES + PLACES + [ORG_HEAD] + COMPANIES + PUNCT
assert len(VOCABULARY) == len(set(VOCABULARY)) == 60

PER_CUE, LOC_CUE = "ông", "tỉnh"


def _fillers(rng: np.random.Generator, k: int) -> list[tuple[str, str]]:
    return [(FILLERS[i], "O") for i in rng.integers(0, len(FILLERS), size=k)]


def _mention(rng: np.random.Generator) -> list[tuple[str, str]]:
    kind = rng.integers(0, 3)
    if kind == 0:
        out = [(TITLES[rng.integers(len(TITLES))], "O"), (NAMES[rng.integers(len(NAMES))], "B-PER")]
        if rng.random() < 0.3:
            out.append((NAMES[rng.integers(len(NAMES))], "I-PER"))
        return out
    if kind == 1:
        return [(PLACES[rng.integers(len(PLACES))], "B-LOC")]
    return [(ORG_HEAD, "B-ORG"), (COMPANIES[rng.integers(len(COMPANIES))], "I-ORG")]


def pattern_corpus(n: int, seed: int = 0) -> list[Sentence]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        pieces = _fillers(rng, rng.integers(1, 4))
        for _ in range(rng.integers(1, 3)):
            pieces += _mention(rng) + _fillers(rng, rng.integers(1, 4))
        pieces.append((PUNCT[0], "O"))
        out.append(Sentence([w for w, _ in pieces], [t for _, t in pieces]))
    return out


def long_range_corpus(n: int, seed: int = 0, min_gap: int = 6) -> list[Sentence]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        person = rng.random() < 0.5
        cue = PER_CUE if person else LOC_CUE
        name = NAMES[rng.integers(len(NAMES))]
        pieces = [(cue, "O")] + _fillers(rng, min_gap + rng.integers(0, 3))
        pieces.append((name, "B-PER" if person else "B-LOC"))
        pieces += _fillers(rng, rng.integers(1, 4)) + [(PUNCT[0], "O")]
        out.append(Sentence([w for w, _ in pieces], [t for _, t in pieces]))
    return out


def nested_corpus(n: int, seed: int = 0) -> list[Sentence]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        pieces = [(w, "O", "O") for w, _ in _fillers(rng, rng.integers(1, 4))]
        for _ in range(rng.integers(1, 3)):
            kind = rng.integers(0, 3)
            if kind == 0:
                pieces += [("bác_sĩ", "O", "O"), (NAMES[rng.integers(len(NAMES))], "O", "B-PER")]
            elif kind == 1:
                pieces += [(PLACES[rng.integers(len(PLACES))], "B-LOC", "O")]
            else:
                pieces += [(ORG_HEAD, "B-ORG", "O"), (PLACES[rng.integers(len(PLACES))], "I-ORG", "B-LOC")]
            pieces += [(w, "O", "O") for w, _ in _fillers(rng, rng.integers(1, 4))]
        pieces.append((PUNCT[0], "O", "O"))
        out.append(Sentence([p[0] for p in pieces], [p[1] for p in pieces], [p[2] for p in pieces]))
    return out
