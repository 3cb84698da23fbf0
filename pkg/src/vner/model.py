"""The full tagger: word layer, encoder, attentive decoder and CRF."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import crf as crf_mod
from . import numerics as nx
from .config import TrainConfig
from .crf import Crf, TagScheme
from .data import PAD, UNK, Sentence, Vocabulary, build_vocab, decode_joint, encode_joint
from .encoder_attention import DecoderOutput, decode_sequence, encode
from .layers import EmbeddingTable, Layer, Linear, LstmCell, dropout, embed
from .numerics import Tensor
from .word_layer import LM_BOUNDARY, LM_UNK, SPACE, WordLayer, highway_taps, lm_loss, lm_targets, \
    run_char_lm, spell, word_vectors

FEATURES = ("pos", "chunk")


def sentence_labels(sent: Sentence, nested: bool) -> list[str] | None:
    if sent.tags is None:
        return None
    if nested:
        if sent.tags2 is None:
            raise ValueError("nested mode needs a second tag column")
        return encode_joint(sent.tags, sent.tags2)
    return list(sent.tags)


@dataclass
class Vocabs:
    words: Vocabulary
    chars: Vocabulary
    lm: Vocabulary
    labels: list[str]
    pos: Vocabulary | None = None
    chunk: Vocabulary | None = None

    @classmethod
    def build(cls, corpus: Sequence[Sentence], config: TrainConfig) -> "Vocabs":
        """Vocabularies from the training split only."""
        norm = (lambda w: w.lower()) if config.lowercase else (lambda w: w)
        words = build_vocab([[norm(w) for w in s.tokens] for s in corpus])
        chars = build_vocab([list(w) for s in corpus for w in s.tokens], reserved=(PAD, UNK, SPACE))
        lm = build_vocab([s.tokens for s in corpus], reserved=(LM_UNK, LM_BOUNDARY),
                         max_size=config.lm_vocab_size, unk=LM_UNK)
        seen: dict[str, None] = {}
        for s in corpus:
            for lab in sentence_labels(s, config.nested) or []:
                seen.setdefault(lab, None)
        outside = "O+O" if config.nested else "O"
        labels = [outside] + sorted(l for l in seen if l != outside)
        feats = {}
        for name in FEATURES:
            cols = [s.feature(name) for s in corpus]
            if all(c is not None for c in cols) and cols:
                feats[name] = build_vocab(cols)
        return cls(words, chars, lm, labels, **feats)

    def to_dict(self) -> dict:
        d = {"words": self.words.to_dict(), "chars": self.chars.to_dict(), "lm": self.lm.to_dict(),
             "labels": list(self.labels)}
        for name in FEATURES:
            v = getattr(self, name)
            if v is not None:
                d[name] = v.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabs":
        feats = {n: Vocabulary.from_dict(d[n]) for n in FEATURES if n in d}
        return cls(Vocabulary.from_dict(d["words"]), Vocabulary.from_dict(d["chars"]),
                   Vocabulary.from_dict(d["lm"]), list(d["labels"]), **feats)


@dataclass
class Batch:
    """Index arrays for a group of sentences, time-major (row ``t * B + b``)."""

    size: int
    steps: int
    lengths: np.ndarray
    word_mask: np.ndarray       # (T, B)
    word_ids: np.ndarray        # (T * B,)
    features: dict[str, np.ndarray]
    char_ids: np.ndarray        # (C, B)
    char_mask: np.ndarray       # (C, B)
    fwd_tap: np.ndarray         # (T * B,) rows of the stacked char states
    bwd_tap: np.ndarray
    real: np.ndarray            # word rows that are not padding, sentence by sentence
    lm_fwd: np.ndarray          # targets for the real rows
    lm_bwd: np.ndarray
    labels: np.ndarray | None   # (T, B)


def make_batch(sentences: Sequence[Sentence], vocabs: Vocabs, config: TrainConfig,
               with_labels: bool = True) -> Batch:
    B = len(sentences)
    if B == 0:
        raise ValueError("empty batch")
    lengths = np.array([len(s) for s in sentences])
    if lengths.min() == 0:
        raise ValueError("empty sentence in batch")
    T = int(lengths.max())
    spelled = [spell(s.tokens, vocabs.chars) for s in sentences]
    C = max(len(sp.ids) for sp in spelled)
    norm = (lambda w: w.lower()) if config.lowercase else (lambda w: w)

    word_mask = np.zeros((T, B), dtype=bool)
    word_ids = np.zeros((T, B), dtype=np.int64)
    char_ids = np.zeros((C, B), dtype=np.int64)
    char_mask = np.zeros((C, B), dtype=bool)
    fwd_tap = np.zeros((T, B), dtype=np.int64)
    bwd_tap = np.zeros((T, B), dtype=np.int64)
    feats = {n: np.zeros((T, B), dtype=np.int64) for n in FEATURES if getattr(vocabs, n) is not None}
    labels = np.zeros((T, B), dtype=np.int64) if with_labels else None
    label_index = {l: i for i, l in enumerate(vocabs.labels)}
    real, lm_f, lm_b = [], [], []
    for b, (sent, sp) in enumerate(zip(sentences, spelled)):
        n = len(sent)
        word_mask[:n, b] = True
        word_ids[:n, b] = vocabs.words.indices(norm(w) for w in sent.tokens)
        char_ids[:len(sp.ids), b] = sp.ids
        char_mask[:len(sp.ids), b] = True
        for i, (start, end) in enumerate(sp.boundaries):
            fwd_tap[i, b] = end * B + b
            bwd_tap[i, b] = (start - 1) * B + b
        for name, arr in feats.items():
            col = sent.feature(name)
            if col is None:
                raise ValueError(f"sentence lacks the {name} column the model was trained with")
            arr[:n, b] = getattr(vocabs, name).indices(col)
        if with_labels:
            labs = sentence_labels(sent, config.nested)
            if labs is None:
                raise ValueError("sentence has no gold tags")
            try:
                labels[:n, b] = [label_index[l] for l in labs]
            except KeyError as exc:
                raise ValueError(f"tag {exc.args[0]!r} is not in the training tag inventory") from None
        real.extend(t * B + b for t in range(n))
        f, bk = lm_targets(vocabs.lm.indices(sent.tokens), vocabs.lm.index(LM_BOUNDARY))
        lm_f.extend(f)
        lm_b.extend(bk)
    return Batch(B, T, lengths, word_mask, word_ids.reshape(-1),
                 {n: a.reshape(-1) for n, a in feats.items()}, char_ids, char_mask,
                 fwd_tap.reshape(-1), bwd_tap.reshape(-1), np.array(real, dtype=np.int64),
                 np.array(lm_f, dtype=np.int64), np.array(lm_b, dtype=np.int64), labels)


def joint_objective(crf_nll: Tensor, lm_fwd: Tensor, lm_bwd: Tensor, lm_weight: float,
                    n_sentences: int) -> Tensor:
    """``(crf_nll + lm_weight * (lm_fwd + lm_bwd)) / n_sentences`` from batch sums."""
    total = crf_nll
    if lm_weight:
        total = nx.add(total, nx.scale(nx.add(lm_fwd, lm_bwd), lm_weight))
    return nx.divide(total, n_sentences)


@dataclass
class Forward:
    loss: Tensor
    crf_nll: Tensor
    lm_fwd: Tensor
    lm_bwd: Tensor
    decoder: DecoderOutput
    potentials: Tensor
    stop: Tensor


class VNER(Layer):
    def __init__(self, config: TrainConfig, vocabs: Vocabs, seed: int | None = None,
                 word_embeddings: EmbeddingTable | None = None):
        self.config = config
        self.vocabs = vocabs
        rng = np.random.default_rng(config.seed if seed is None else seed)
        if word_embeddings is None:
            word_embeddings = EmbeddingTable.random(len(vocabs.words), config.word_dim, rng)
        elif word_embeddings.vocab_size != len(vocabs.words):
            raise ValueError("embedding table does not match the word vocabulary")
        self.word_emb = word_embeddings
        if config.freeze_embeddings:
            self.word_emb.freeze()
        self.pos_emb = (EmbeddingTable.random(len(vocabs.pos), config.feature_dim, rng)
                        if vocabs.pos is not None else None)
        self.chunk_emb = (EmbeddingTable.random(len(vocabs.chunk), config.feature_dim, rng)
                          if vocabs.chunk is not None else None)
        self.chars = WordLayer(len(vocabs.chars), config.char_dim, config.char_hidden, len(vocabs.lm),
                               rng, config.highway_activation, config.highway_carry)
        in_dim = self.word_emb.dim + 2 * config.char_hidden + sum(
            e.dim for e in (self.pos_emb, self.chunk_emb) if e is not None)
        H, D = config.word_hidden, config.decoder_dim
        self.enc_fwd = LstmCell(in_dim, H, rng)
        self.enc_bwd = LstmCell(in_dim, H, rng)
        self.query = Linear(D, 2 * H, rng, bias=False) if config.attention and D != 2 * H else None
        dec_in = 2 * H + D + (2 * H if config.attention else 0)
        self.decoder = LstmCell(dec_in, D, rng)
        self.crf = Crf(D, TagScheme(list(vocabs.labels)), rng, config.full_pairwise)
        self.word_dim_total = in_dim
        dtype = np.dtype(config.dtype)
        for p in self.parameters().values():
            p.data = p.data.astype(dtype)

    def parameters(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.named_parameters().items()
                if not k.startswith(("config", "vocabs"))}

    def trainable(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.parameters().items() if v.requires_grad}

    def zero_grad(self) -> None:
        for p in self.trainable().values():
            p.zero_grad()

    # -- forward ----------------------------------------------------------------

    def encode_batch(self, batch: Batch, training: bool, rng: np.random.Generator | None):
        cfg = self.config
        fwd, bwd = run_char_lm(self.chars, batch.char_ids, batch.char_mask)
        taps = highway_taps(self.chars, fwd, bwd, batch.fwd_tap, batch.bwd_tap)
        feats = [embed(tab, batch.features[name])
                 for name, tab in (("pos", self.pos_emb), ("chunk", self.chunk_emb)) if tab is not None]
        x = word_vectors(embed(self.word_emb, batch.word_ids), taps["fwd_word"], taps["bwd_word"],
                         feats, cfg.dropout, training, rng)
        enc = encode(x, batch.steps, self.enc_fwd, self.enc_bwd, batch.word_mask)
        enc = enc.with_outputs(dropout(enc.outputs, cfg.dropout, training, rng))
        dec = decode_sequence(enc, self.decoder, self.query, cfg.attention)
        return taps, dec

    def forward(self, batch: Batch, training: bool = False,
                rng: np.random.Generator | None = None) -> Forward:
        """Joint loss averaged over the sentences of the batch."""
        if batch.labels is None:
            raise ValueError("batch has no labels")
        cfg = self.config
        taps, dec = self.encode_batch(batch, training, rng)
        L, stop = self.crf.potentials(dec.z, batch.steps, batch.size, cfg.constrained_train)
        logz = nx.sum_all(crf_mod.log_partition_batch(L, stop, batch.lengths))
        gold = crf_mod.gold_score_batch(L, stop, batch.labels, batch.lengths)
        crf_nll = nx.sub(logz, gold)
        lm_f, lm_b = lm_loss(self.chars, nx.index(taps["fwd_lm"], batch.real),
                             nx.index(taps["bwd_lm"], batch.real), batch.lm_fwd, batch.lm_bwd)
        loss = joint_objective(crf_nll, lm_f, lm_b, cfg.lm_weight, batch.size)
        return Forward(loss, crf_nll, lm_f, lm_b, dec, L, stop)

    def decode(self, batch: Batch) -> list[list[str]]:
        """Viterbi label strings per sentence (dropout off)."""
        _, dec = self.encode_batch(batch, False, None)
        L, stop = self.crf.potentials(dec.z, batch.steps, batch.size)
        legal = self.crf._legal if self.config.constrained_decode else None
        out = []
        for b, n in enumerate(batch.lengths):
            path, _ = crf_mod.viterbi_path(L.data[:, b], stop.data, int(n), legal)
            out.append([self.vocabs.labels[i] for i in path])
        return out

    def predict(self, sentences: Sequence[Sentence], batch_size: int = 64) -> list[list[list[str]]]:
        """Tag layers per sentence: one layer, or two when the model is nested."""
        out = []
        for i in range(0, len(sentences), batch_size):
            chunk = sentences[i:i + batch_size]
            batch = make_batch(chunk, self.vocabs, self.config, with_labels=False)
            for labs in self.decode(batch):
                out.append(list(decode_joint(labs)) if self.config.nested else [labs])
        return out
