"""Pure-Python versions of the compiled kernels (same signatures, same outputs)."""
import math

import numpy as np


def _softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def simple_walks(indptr, indices, starts, max_len, uniforms):
    out = np.full((len(starts), max_len), -1, dtype=np.int64)
    for w, s in enumerate(starts):
        walk = [int(s)]
        for step in range(1, max_len):
            cur = walk[-1]
            free = [int(nb) for nb in indices[indptr[cur]:indptr[cur + 1]] if nb not in walk]
            if not free:
                break
            pick = min(int(math.floor(uniforms[w, step - 1] * len(free))), len(free) - 1)
            walk.append(free[pick])
        out[w, :len(walk)] = walk
    return out


def temporal_walks(indptr, indices, edge_time, starts, walk_len, uniforms):
    walks = np.full((len(starts), walk_len), -1, dtype=np.int64)
    times = np.full((len(starts), walk_len - 1), np.nan)
    for w, s in enumerate(starts):
        walks[w, 0] = s
        last = math.nan
        for step in range(1, walk_len):
            cur = walks[w, step - 1]
            lo, hi = indptr[cur], indptr[cur + 1]
            ok = [j for j in range(lo, hi)
                  if math.isnan(edge_time[j]) or math.isnan(last) or edge_time[j] <= last]
            if not ok:
                break
            pick = min(int(math.floor(uniforms[w, step - 1] * len(ok))), len(ok) - 1)
            j = ok[pick]
            walks[w, step] = indices[j]
            times[w, step - 1] = edge_time[j]
            if not math.isnan(edge_time[j]):
                last = edge_time[j]
    return walks, times


def sgns_epoch(w_in, w_out, centers, contexts, negatives, lrs):
    total = 0.0
    for p in range(len(centers)):
        c, lr = centers[p], lrs[p]
        v = w_in[c]
        grad = np.zeros_like(v)
        targets = [(contexts[p], 1.0)] + [(n, 0.0) for n in negatives[p] if n != contexts[p]]
        for tgt, label in targets:
            f = float(v @ w_out[tgt])
            total += _softplus(-f) if label else _softplus(f)
            g = (label - 1.0 / (1.0 + math.exp(-f))) * lr
            grad += g * w_out[tgt]
            w_out[tgt] += g * v
        w_in[c] += grad
    return total
