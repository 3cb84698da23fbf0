# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Training a tagger on a generated corpus
#
# Real annotated Vietnamese corpora are access-restricted, so this walkthrough
# uses the built-in generator. Entities follow lexical patterns: a trigger word
# such as a title comes right before a person name drawn from a closed list,
# and location names end in a fixed suffix.

# %%
import tempfile
from pathlib import Path

from vner import TrainConfig, load_checkpoint, save_checkpoint, train
from vner.data import Sentence
from vner.synthetic import pattern_corpus
from vner.training import evaluate

train_set = pattern_corpus(300, seed=101)
dev_set = pattern_corpus(60, seed=201)
for s in train_set[:3]:
    print(" ".join(f"{w}/{t}" for w, t in zip(s.tokens, s.tags)))

# %% [markdown]
# ## A small model
#
# The published hidden sizes are far larger than this corpus needs. Hidden
# sizes of 25, a larger learning rate and a handful of epochs are enough to
# learn the patterns.

# %%
config = TrainConfig(char_hidden=25, word_hidden=25, word_dim=50, batch_size=16, epochs=8,
                     learning_rate=0.01, seed=1)
result = train(train_set, dev_set, config)
for row in result.history:
    print(f"epoch {row['epoch']}: loss {row['loss']:.3f}, dev F1 {100 * row['dev_f1']:.2f}")

# %% [markdown]
# The returned model holds the parameters from the epoch with the best dev F1.

# %%
report = evaluate(result.model, dev_set)
print(report.format())

# %% [markdown]
# ## Checkpoints
#
# A checkpoint stores the configuration, vocabularies, every tensor and the
# training history in one binary file. A reloaded model predicts exactly what
# the original did.

# %%
path = Path(tempfile.mkdtemp()) / "demo.vner"
save_checkpoint(path, result.checkpoint)
restored = load_checkpoint(path).build_model()
print("identical predictions:", restored.predict(dev_set) == result.model.predict(dev_set))

# %% [markdown]
# ## Tagging new text
#
# Input is already tokenized. Unseen words fall back to the unknown entry, but
# the character language models still see their spelling.

# %%
sentence = Sentence(dev_set[0].tokens)
tags = restored.predict([sentence])[0][0]
print(list(zip(sentence.tokens, tags)))

# %% [markdown]
# The same steps are available from the shell:
#
# ```
# vner train --train train.txt --dev dev.txt --word-hidden 25 --learning-rate 0.01 --epochs 8 --output demo.vner
# vner tag --model demo.vner --input test.txt > tagged.txt
# vner eval --gold test.txt --pred tagged.txt
# ```
