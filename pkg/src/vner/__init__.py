"""Vietnamese named-entity tagger: character language models with highway
taps, a BiLSTM encoder with an attentive decoder, and a linear-chain CRF,
all on a small numpy autodiff engine."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import Sentence, read_corpus
from .evaluation import Report, score
from .model import VNER, Vocabs
from .training import train

__all__ = ["Checkpoint", "load_checkpoint", "save_checkpoint", "TrainConfig", "Sentence",
           "read_corpus", "Report", "score", "VNER", "Vocabs", "train"]
__version__ = "0.1.0"
