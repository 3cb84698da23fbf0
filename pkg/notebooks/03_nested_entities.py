# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Nested entities as joint tags
#
# Some annotations carry a second tag layer, for example a person name inside a
# span that is outside any entity on the first level. The tagger handles this
# by joining the two tags of each token into one label such as `O+B-PER` and
# training an ordinary flat model over the joint labels.

# %%
from vner import TrainConfig, score, train
from vner.data import decode_joint, encode_joint, is_valid_bio
from vner.synthetic import nested_corpus

level1 = ["O", "O", "O", "O", "O", "O", "O", "O", "O"]
level2 = ["O", "O", "O", "O", "O", "O", "B-PER", "O", "O"]
joint = encode_joint(level1, level2)
print(joint)
print("decodes back:", decode_joint(joint) == (level1, level2))

# %% [markdown]
# ## Training on a generated nested corpus
#
# The generator places a level-2 person name inside level-1 `O` tokens. The
# model is told about the second layer with `nested=True` and a column spec
# that names both tag columns.

# %%
train_set = nested_corpus(300, seed=500)
dev_set = nested_corpus(60, seed=600)
s = train_set[0]
for w, a, b in zip(s.tokens, s.tags, s.tags2):
    print(f"{w:<12}{a:<8}{b}")

config = TrainConfig(char_hidden=25, word_hidden=25, word_dim=50, batch_size=16, epochs=8,
                     learning_rate=0.01, nested=True, columns="token,tag,tag2", seed=1)
result = train(train_set, dev_set, config)
print("best dev F1:", round(100 * result.checkpoint.best_dev_f1, 2))

# %% [markdown]
# ## Two layers out
#
# Decoded joint labels are split back into two layers. Each layer is valid BIO
# on its own, and scoring pools the spans of both levels.

# %%
layers = result.model.predict(dev_set)
print("all layers valid:", all(is_valid_bio(l1) and is_valid_bio(l2) for l1, l2 in layers))
report = score([[s.tags, s.tags2] for s in dev_set], layers, nested=True)
print(report.format())
