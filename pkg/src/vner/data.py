"""Column-format corpora, vocabularies, joint tags and pretrained embeddings."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .layers import EmbeddingTable
from .numerics import Tensor

log = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
JOINT_SEP = "+"
COLUMN_ROLES = ("token", "pos", "chunk", "tag", "tag2", "_")


class CorpusError(ValueError):
    """Malformed corpus or embedding file; carries the offending line number."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass
class Sentence:
    tokens: list[str]
    tags: list[str] | None = None
    tags2: list[str] | None = None
    pos: list[str] | None = None
    chunk: list[str] | None = None
    lines: list[str] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def feature(self, name: str) -> list[str] | None:
        return getattr(self, name)


Corpus = list[Sentence]


def parse_columns(spec: str | Sequence[str]) -> list[str]:
    roles = [c.strip() for c in spec.split(",")] if isinstance(spec, str) else list(spec)
    for r in roles:
        if r not in COLUMN_ROLES:
            raise ValueError(f"unknown column role {r!r}; expected one of {COLUMN_ROLES}")
    if "token" not in roles:
        raise ValueError("column spec needs a 'token' column")
    dup = [r for r, n in Counter(roles).items() if n > 1 and r != "_"]
    if dup:
        raise ValueError(f"duplicate column roles {dup}")
    return roles


# --- BIO helpers -------------------------------------------------------------

def split_tag(tag: str) -> tuple[str, str | None]:
    if tag == "O":
        return "O", None
    prefix, _, kind = tag.partition("-")
    if prefix not in ("B", "I") or not kind:
        raise ValueError(f"not a BIO tag: {tag!r}")
    return prefix, kind


def bio_allowed(prev: str | None, tag: str) -> bool:
    """Whether ``tag`` may follow ``prev`` (``None`` = sentence start)."""
    prefix, kind = split_tag(tag)
    if prefix != "I":
        return True
    if prev is None:
        return False
    p_prefix, p_kind = split_tag(prev)
    return p_prefix != "O" and p_kind == kind


def repair_bio(tags: Sequence[str]) -> tuple[list[str], list[int]]:
    """Turn every orphan I-X into B-X. Returns the fixed tags and repaired positions."""
    out, fixed = [], []
    prev = None
    for i, tag in enumerate(tags):
        if not bio_allowed(prev, tag):
            tag = "B-" + split_tag(tag)[1]
            fixed.append(i)
        out.append(tag)
        prev = tag
    return out, fixed


def is_valid_bio(tags: Sequence[str]) -> bool:
    prev = None
    for tag in tags:
        if not bio_allowed(prev, tag):
            return False
        prev = tag
    return True


# --- joint tags for two-level nesting ---------------------------------------

def encode_joint(level1: Sequence[str], level2: Sequence[str]) -> list[str]:
    if len(level1) != len(level2):
        raise ValueError(f"tag layers differ in length: {len(level1)} vs {len(level2)}")
    for t in (*level1, *level2):
        split_tag(t)
    return [f"{a}{JOINT_SEP}{b}" for a, b in zip(level1, level2)]


def decode_joint(tags: Iterable[str], inventory: Iterable[str] | None = None) -> tuple[list[str], list[str]]:
    """Split rendered ``L1+L2`` tags back into two layers.

    Each half must be a BIO tag, and a member of ``inventory`` when one is given.
    """
    allowed = set(inventory) if inventory is not None else None
    l1, l2 = [], []
    for tag in tags:
        if tag.count(JOINT_SEP) != 1:
            raise ValueError(f"joint tag {tag!r} must contain exactly one {JOINT_SEP!r}")
        a, b = tag.split(JOINT_SEP)
        for half in (a, b):
            split_tag(half)
            if allowed is not None and half not in allowed:
                raise ValueError(f"tag {half!r} in {tag!r} is not in the inventory")
        l1.append(a)
        l2.append(b)
    return l1, l2


def bio_inventory(types: Sequence[str]) -> list[str]:
    return ["O"] + [f"{p}-{t}" for t in types for p in ("B", "I")]


# --- reading / writing ---------------------------------------------------------

def _split_line(line: str) -> list[str]:
    return line.split("\t") if "\t" in line else line.split()


def read_corpus(path: str | Path, columns: str | Sequence[str] = "token,tag",
                repair: bool = True) -> Corpus:
    """Read a blank-line separated column file.

    Orphan ``I-X`` tags are rewritten to ``B-X`` with a warning when ``repair``
    is set. A line whose column count disagrees with ``columns`` is an error.
    """
    roles = parse_columns(columns)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read corpus: {exc}", path) from exc
    corpus: Corpus = []
    rows: list[list[str]] = []
    raw: list[str] = []
    start_line = 1

    def flush():
        if rows:
            corpus.append(_make_sentence(rows, raw, roles, repair, path, start_line))
            rows.clear()
            raw.clear()

    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if not rows:
            start_line = lineno
        fields = _split_line(line)
        if len(fields) != len(roles):
            raise CorpusError(f"expected {len(roles)} columns ({','.join(roles)}), "
                              f"found {len(fields)}", path, lineno)
        rows.append(fields)
        raw.append(line)
    flush()
    return corpus


def _make_sentence(rows, raw, roles, repair, path, line) -> Sentence:
    cols = {r: [row[i] for row in rows] for i, r in enumerate(roles) if r != "_"}
    sent = Sentence(tokens=cols["token"], lines=list(raw))
    for role, attr in (("tag", "tags"), ("tag2", "tags2"), ("pos", "pos"), ("chunk", "chunk")):
        if role in cols:
            setattr(sent, attr, cols[role])
    for attr in ("tags", "tags2"):
        tags = getattr(sent, attr)
        if tags is None or any(JOINT_SEP in t for t in tags):
            # joint tags are checked half by half when decoded
            continue
        try:
            fixed_tags, fixed = repair_bio(tags)
        except ValueError as exc:
            raise CorpusError(str(exc), path, line) from exc
        if fixed:
            if not repair:
                raise CorpusError(f"ill-formed BIO at tokens {fixed}", path, line)
            log.warning("%s:%d: repaired orphan I- tags at token positions %s", path, line, fixed)
            setattr(sent, attr, fixed_tags)
    return sent


def write_tagged(path: str | Path, corpus: Corpus, predictions: Sequence[Sequence[Sequence[str]]]) -> None:
    """Write each input line with predicted tag column(s) appended.

    ``predictions[s]`` is a list of tag layers for sentence ``s``.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for sent, layers in zip(corpus, predictions):
            lines = sent.lines or sent.tokens
            for i, line in enumerate(lines):
                fh.write("\t".join([line, *(layer[i] for layer in layers)]) + "\n")
            fh.write("\n")


def write_corpus(path: str | Path, corpus: Corpus) -> str:
    """Write token, features and gold tags as tab-separated columns.

    Returns the column roles written, suitable for ``read_corpus``.
    """
    first = corpus[0] if corpus else Sentence([], [])
    roles = ["token"] + [r for r in ("pos", "chunk") if getattr(first, r) is not None]
    roles += ["tag"] + (["tag2"] if first.tags2 is not None else [])
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            fields = {"token": sent.tokens, "tag": sent.tags, "tag2": sent.tags2,
                      "pos": sent.pos, "chunk": sent.chunk}
            cols = [fields[r] for r in roles]
            for row in zip(*cols):
                fh.write("\t".join(row) + "\n")
            fh.write("\n")
    return ",".join(roles)


# --- vocabularies ----------------------------------------------------------

class Vocabulary:
    """Bidirectional symbol/index map. Reserved symbols come first."""

    def __init__(self, symbols: Iterable[str] = (), reserved: Sequence[str] = (PAD, UNK),
                 unk: str | None = UNK):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        self.reserved = list(reserved)
        self.unk = unk  # fallback for unknown symbols, when present
        for s in (*reserved, *symbols):
            self.add(s)

    def add(self, symbol: str) -> int:
        if symbol not in self.stoi:
            self.stoi[symbol] = len(self.itos)
            self.itos.append(symbol)
        return self.stoi[symbol]

    @property
    def unk_id(self) -> int:
        return self.stoi.get(self.unk, -1)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.stoi

    def index(self, symbol: str) -> int:
        idx = self.stoi.get(symbol)
        if idx is None:
            if self.unk not in self.stoi:
                raise KeyError(symbol)
            return self.stoi[self.unk]
        return idx

    def indices(self, symbols: Iterable[str]) -> list[int]:
        return [self.index(s) for s in symbols]

    def symbol(self, idx: int) -> str:
        return self.itos[idx]

    def to_dict(self) -> dict:
        return {"symbols": self.itos, "reserved": self.reserved, "unk": self.unk}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        v = cls(reserved=(), unk=d.get("unk", UNK))
        for s in d["symbols"]:
            v.add(s)
        v.reserved = list(d["reserved"])
        return v

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} symbols)"


def build_vocab(sequences: Iterable[Iterable[str]], reserved: Sequence[str] = (PAD, UNK),
                max_size: int | None = None, min_count: int = 1, unk: str | None = UNK) -> Vocabulary:
    """Most frequent symbols first; ties broken by first appearance."""
    counts: Counter = Counter()
    for seq in sequences:
        counts.update(seq)
    ranked = [s for s, n in counts.most_common() if n >= min_count and s not in reserved]
    if max_size is not None:
        ranked = ranked[:max(0, max_size - len(reserved))]
    return Vocabulary(ranked, reserved, unk)


# --- pretrained embeddings ---------------------------------------------------

def read_embedding_file(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    """Parse ``token v1 v2 ...`` lines. An optional ``<count> <dim>`` header is skipped."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read embeddings: {exc}", path) from exc
    for lineno, line in enumerate(lines, 1):
        parts = line.rstrip().split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise CorpusError("embedding line has no values", path, lineno)
        elif len(values) != dim:
            raise CorpusError(f"expected {dim} values, found {len(values)}", path, lineno)
        if word in vectors:
            log.warning("%s:%d: duplicate embedding for %r ignored", path, lineno, word)
            continue
        try:
            vectors[word] = np.array([float(v) for v in values])
        except ValueError as exc:
            raise CorpusError(f"non-numeric embedding value: {exc}", path, lineno) from exc
    if dim is None:
        raise CorpusError("embedding file is empty", path)
    return vectors, dim


def load_embeddings(path: str | Path, vocab: Vocabulary, seed: int = 0,
                    trainable: bool = True, lowercase_fallback: bool = True) -> EmbeddingTable:
    """Embedding table over ``vocab``: file vectors where available, else uniform(-0.25, 0.25).

    Reserved rows (PAD/UNK) are zero.
    """
    vectors, dim = read_embedding_file(path)
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.25, 0.25, size=(len(vocab), dim))
    found = 0
    for i, word in enumerate(vocab.itos):
        if word in vocab.reserved:
            table[i] = 0.0
            continue
        vec = vectors.get(word)
        if vec is None and lowercase_fallback:
            vec = vectors.get(word.lower())
        if vec is not None:
            table[i] = vec
            found += 1
    log.info("pretrained vectors for %d of %d words (dim %d)", found, len(vocab), dim)
    return EmbeddingTable(Tensor(table, requires_grad=trainable), trainable)
