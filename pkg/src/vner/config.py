"""Model and training hyperparameters.

Defaults for the sizes, dropout, optimizer, learning rate and batch size are
the published settings; the rest are this package's choices.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

PUBLISHED_DEFAULTS = ("char_hidden", "word_hidden", "char_dim", "word_dim", "dropout", "word_layers",
                     "char_layers", "optimizer", "learning_rate", "batch_size")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    char_hidden: int = 300
    word_hidden: int = 300
    char_dim: int = 30
    word_dim: int = 100
    dropout: float = 0.6
    word_layers: int = 1
    char_layers: int = 1
    optimizer: str = "adam"
    learning_rate: float = 0.001
    batch_size: int = 128

    lm_weight: float = 1.0          # lambda in the joint objective
    epochs: int = 50
    patience: int = 10
    seed: int = 1
    attention: bool = True
    decoder_hidden: int = 0         # 0 means 2 * word_hidden
    highway_carry: bool = False
    highway_activation: str = "tanh"
    full_pairwise: bool = False
    constrained_decode: bool = True
    constrained_train: bool = False
    lm_vocab_size: int = 5000
    feature_dim: int = 10
    freeze_embeddings: bool = False
    clip_norm: float = 5.0
    lowercase: bool = False
    nested: bool = False
    columns: str = "token,tag"
    dtype: str = "float64"

    def __post_init__(self):
        self.validate()

    @property
    def decoder_dim(self) -> int:
        return self.decoder_hidden or 2 * self.word_hidden

    def validate(self) -> None:
        for name in ("char_hidden", "word_hidden", "char_dim", "word_dim", "batch_size",
                     "lm_vocab_size", "feature_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.decoder_hidden < 0:
            raise ConfigError("decoder_hidden must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lm_weight < 0:
            raise ConfigError(f"lm_weight must be >= 0, got {self.lm_weight}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.word_layers != 1 or self.char_layers != 1:
            raise ConfigError("only single-layer word and character LSTMs are supported")
        if self.optimizer != "adam":
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")
        if self.highway_activation not in ("tanh", "relu", "identity"):
            raise ConfigError(f"unknown highway activation {self.highway_activation!r}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if self.lm_vocab_size < 2:
            raise ConfigError("lm_vocab_size must leave room for the UNK and boundary words")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, text: str):
    kind = {f.name: f.type for f in fields(TrainConfig)}[name]
    if kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: not a boolean: {text!r}")
    try:
        return {"int": int, "float": float}.get(kind, str)(text.strip())
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as {kind}") from None


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    known = {f.name for f in fields(TrainConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lm_weight"
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def describe(config: TrainConfig, sources: dict[str, str] | None = None) -> str:
    """One ``key = value  (source)`` line per setting."""
    sources = sources or {}
    lines = []
    for f in fields(TrainConfig):
        src = sources.get(f.name, "default")
        lines.append(f"{f.name.replace('_', '-')} = {getattr(config, f.name)}  ({src})")
    return "\n".join(lines)
