# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: graph walks and skip-gram SGD.

Randomness is supplied by the caller as pre-drawn uniforms so that this
module and ``_pykernels`` emit identical walks for the same stream.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs, isnan, floor

cnp.import_array()


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def simple_walks(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                 const cnp.int64_t[::1] starts, int max_len, const double[:, ::1] uniforms):
    cdef Py_ssize_t n = starts.shape[0]
    out_arr = np.full((n, max_len), -1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t w, step, j, k, lo, hi, cnt, pick
    cdef cnp.int64_t cur, nb
    cdef bint seen
    for w in range(n):
        out[w, 0] = starts[w]
        for step in range(1, max_len):
            cur = out[w, step - 1]
            lo = indptr[cur]
            hi = indptr[cur + 1]
            cnt = 0
            for j in range(lo, hi):
                nb = indices[j]
                seen = False
                for k in range(step):
                    if out[w, k] == nb:
                        seen = True
                        break
                if not seen:
                    cnt += 1
            if cnt == 0:
                break
            pick = <Py_ssize_t>floor(uniforms[w, step - 1] * cnt)
            if pick >= cnt:
                pick = cnt - 1
            for j in range(lo, hi):
                nb = indices[j]
                seen = False
                for k in range(step):
                    if out[w, k] == nb:
                        seen = True
                        break
                if not seen:
                    if pick == 0:
                        out[w, step] = nb
                        break
                    pick -= 1
    return out_arr


def temporal_walks(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                   const double[::1] edge_time, const cnp.int64_t[::1] starts,
                   int walk_len, const double[:, ::1] uniforms):
    cdef Py_ssize_t n = starts.shape[0]
    walks_arr = np.full((n, walk_len), -1, dtype=np.int64)
    times_arr = np.full((n, walk_len - 1), np.nan, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] walks = walks_arr
    cdef double[:, ::1] times = times_arr
    cdef Py_ssize_t w, step, j, lo, hi, cnt, pick
    cdef cnp.int64_t cur
    cdef double last, t
    for w in range(n):
        walks[w, 0] = starts[w]
        last = np.nan
        for step in range(1, walk_len):
            cur = walks[w, step - 1]
            lo = indptr[cur]
            hi = indptr[cur + 1]
            cnt = 0
            for j in range(lo, hi):
                t = edge_time[j]
                if isnan(t) or isnan(last) or t <= last:
                    cnt += 1
            if cnt == 0:
                break
            pick = <Py_ssize_t>floor(uniforms[w, step - 1] * cnt)
            if pick >= cnt:
                pick = cnt - 1
            for j in range(lo, hi):
                t = edge_time[j]
                if isnan(t) or isnan(last) or t <= last:
                    if pick == 0:
                        walks[w, step] = indices[j]
                        times[w, step - 1] = t
                        if not isnan(t):
                            last = t
                        break
                    pick -= 1
    return walks_arr, times_arr


def sgns_epoch(double[:, ::1] w_in, double[:, ::1] w_out,
               const cnp.int64_t[::1] centers, const cnp.int64_t[::1] contexts,
               const cnp.int64_t[:, ::1] negatives, const double[::1] lrs):
    cdef Py_ssize_t n_pairs = centers.shape[0]
    cdef Py_ssize_t n_neg = negatives.shape[1]
    cdef Py_ssize_t dim = w_in.shape[1]
    cdef Py_ssize_t p, r, k
    cdef cnp.int64_t c, tgt
    cdef double f, g, lr, label, total = 0.0
    grad = np.zeros(dim, dtype=np.float64)
    cdef double[::1] gv = grad
    for p in range(n_pairs):
        c = centers[p]
        lr = lrs[p]
        for k in range(dim):
            gv[k] = 0.0
        for r in range(n_neg + 1):
            if r == 0:
                tgt = contexts[p]
                label = 1.0
            else:
                tgt = negatives[p, r - 1]
                if tgt == contexts[p]:
                    continue
                label = 0.0
            f = 0.0
            for k in range(dim):
                f += w_in[c, k] * w_out[tgt, k]
            if label > 0:
                total += _softplus(-f)
                g = (1.0 - 1.0 / (1.0 + exp(-f))) * lr
            else:
                total += _softplus(f)
                g = (0.0 - 1.0 / (1.0 + exp(-f))) * lr
            for k in range(dim):
                gv[k] += g * w_out[tgt, k]
            for k in range(dim):
                w_out[tgt, k] += g * w_in[c, k]
        for k in range(dim):
            w_in[c, k] += gv[k]
    return total
