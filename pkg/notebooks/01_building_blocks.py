# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Building blocks
#
# The tagger is built on a small reverse-mode autodiff library over numpy.
# This notebook walks through the pieces bottom-up: a gradient through the
# tape, a highway unit, one attention step and a linear-chain CRF checked
# against brute-force enumeration.

# %%
import itertools

import numpy as np

from vner import numerics as nx
from vner.crf import Crf, TagScheme, log_partition, viterbi
from vner.encoder_attention import attend
from vner.layers import HighwayUnit, highway

rng = np.random.default_rng(0)

# %% [markdown]
# ## Gradients on the tape
#
# Operations run inside a `Graph` record themselves; `backward` replays them
# in reverse. Here the analytic gradient of `sum(tanh(x @ W))` is compared with
# central differences.

# %%
x = nx.Tensor(rng.normal(size=(3, 4)))
W = nx.Tensor(rng.normal(size=(4, 2)), requires_grad=True)


def loss():
    return nx.sum_all(nx.tanh(nx.matmul(x, W)))


with nx.Graph() as g:
    out = loss()
g.backward(out)
numeric = nx.numeric_gradient(lambda: loss().item(), W, 1e-6)
print("max relative error:", nx.relative_error(W.grad, numeric, 1e-8).max())

# %% [markdown]
# ## Highway unit
#
# A highway unit gates a dimension-preserving transform: `t * tanh(W_H x + b_H)`
# with `t = sigmoid(W_T x + b_T)`. The gate stays strictly between 0 and 1.

# %%
unit = HighwayUnit(5, rng)
h = nx.Tensor(rng.normal(size=(2, 5)))
print("output:\n", highway(unit, h).data.round(4))
print("gate range:", unit.gate(h).data.min().round(4), unit.gate(h).data.max().round(4))

# %% [markdown]
# ## One attention step
#
# The query is scored against every encoder state by dot product. The weights
# are a softmax of those scores, and the context is the weighted average of the
# states. Adding the same constant to every score leaves the weights unchanged.

# %%
memory = nx.Tensor(rng.normal(size=(6, 1, 4)))
query = nx.Tensor(rng.normal(size=(1, 4)))
step = attend(query, memory)
print("weights:", step.weights.data.round(3), "sum =", step.weights.data.sum())

# %% [markdown]
# ## CRF against brute force
#
# For a short sentence every label sequence can be listed. The forward
# algorithm's log partition must equal the log-sum-exp of all those scores,
# and Viterbi must pick the best of them.

# %%
scheme = TagScheme(["O", "B-PER", "I-PER"])
crf = Crf(3, scheme, rng)
for p in crf.named_parameters().values():
    p.data[:] = rng.normal(size=p.shape)
z = nx.Tensor(rng.normal(size=(4, 3)))

# potentials[t, 0, prev, lab] scores a step; row crf.start is the sentence start
L, stop = crf.potentials(z, 4, 1)
scores = {}
for y in itertools.product(range(3), repeat=4):
    s, prev = 0.0, crf.start
    for t, lab in enumerate(y):
        s += L.data[t, 0, prev, lab]
        prev = lab
    scores[y] = s + stop.data[prev]

brute = np.logaddexp.reduce(list(scores.values()))
print("forward algorithm:", log_partition(z, crf).item())
print("enumeration:      ", brute)
path, best = viterbi(z, crf, constrained=False)
print("Viterbi:", [scheme.labels[i] for i in path], "best by enumeration:",
      [scheme.labels[i] for i in max(scores, key=scores.get)])
