"""Independent reference computations used as test oracles."""

import itertools

import numpy as np


def crf_score(crf, z, y):
    """Sequence score straight from the raw CRF parameters."""
    W, T = crf.W.data, crf.trans.data
    Y, start, stop = crf.n_labels, crf.start, crf.stop
    total, prev = 0.0, start
    for t, lab in enumerate(y):
        if crf.full_pairwise:
            row = Y if prev == start else prev
            total += z[t] @ W[:, row * Y + lab]
        else:
            total += z[t] @ W[:, lab] + crf.b.data[lab]
        total += T[prev, lab]
        prev = lab
    return total + T[prev, stop]


def enumerate_sequences(n, Y):
    """All label sequences in lexicographic order."""
    return itertools.product(range(Y), repeat=n)


def brute_log_partition(crf, z, allowed=None):
    scores = [crf_score(crf, z, y) for y in enumerate_sequences(len(z), crf.n_labels)
              if allowed is None or allowed(y)]
    m = max(scores)
    return m + np.log(np.sum(np.exp(np.array(scores) - m)))


def brute_viterbi(crf, z, allowed=None):
    """Highest-scoring sequence; the first in lexicographic order wins exact ties."""
    best, best_y = -np.inf, None
    for y in enumerate_sequences(len(z), crf.n_labels):
        if allowed is not None and not allowed(y):
            continue
        s = crf_score(crf, z, y)
        if s > best:
            best, best_y = s, list(y)
    return best_y, best


def legal_under(crf):
    legal = crf.scheme.legality()
    Y = crf.n_labels

    def allowed(y):
        prev = Y
        for lab in y:
            if not legal[prev, lab]:
                return False
            prev = lab
        return True

    return allowed


def conlleval_counts(gold, pred):
    """Chunk counts by a direct left-to-right scan, independent of the span extractor."""
    def chunks(tags):
        out, cur = [], None
        for i, t in enumerate(tags + ["O"]):
            p, _, k = t.partition("-")
            if cur and not (p == "I" and k == cur[2]):
                out.append((cur[0], i - 1, cur[2]))
                cur = None
            if p in ("B", "I") and cur is None:
                cur = (i, None, k)
        return set(out)

    correct = predicted = total = 0
    for g, p in zip(gold, pred):
        gs, ps = chunks(list(g)), chunks(list(p))
        correct += len(gs & ps)
        predicted += len(ps)
        total += len(gs)
    return correct, predicted, total
