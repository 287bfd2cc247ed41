# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()

ctypedef int64_t i64

AND, OR, ANDNOT = 0, 1, 2


cdef inline i64 _max(i64 a, i64 b) nogil:
    return a if a > b else b


cdef inline i64 _min(i64 a, i64 b) nogil:
    return a if a < b else b


def normalize(ent, ts, te):
    ent = np.ascontiguousarray(ent, dtype=np.int64)
    ts = np.ascontiguousarray(ts, dtype=np.int64)
    te = np.ascontiguousarray(te, dtype=np.int64)
    cdef Py_ssize_t n = ent.shape[0]
    order = np.lexsort((ts, ent))
    cdef i64[::1] e = ent[order]
    cdef i64[::1] s = ts[order]
    cdef i64[::1] f = te[order]
    out_e = np.empty(n, dtype=np.int64)
    out_s = np.empty(n, dtype=np.int64)
    out_f = np.empty(n, dtype=np.int64)
    cdef i64[::1] oe = out_e
    cdef i64[::1] os = out_s
    cdef i64[::1] of = out_f
    cdef Py_ssize_t i, k = -1
    with nogil:
        for i in range(n):
            if k >= 0 and oe[k] == e[i] and s[i] <= of[k]:
                if f[i] > of[k]:
                    of[k] = f[i]
            else:
                k += 1
                oe[k] = e[i]
                os[k] = s[i]
                of[k] = f[i]
    return out_e[:k + 1].copy(), out_s[:k + 1].copy(), out_f[:k + 1].copy()


cdef inline Py_ssize_t _push(i64[::1] oe, i64[::1] os, i64[::1] of, Py_ssize_t k,
                             i64 e, i64 s, i64 f) nogil:
    # append, merging with the previous interval when they touch
    if k >= 0 and oe[k] == e and s <= of[k]:
        if f > of[k]:
            of[k] = f
        return k
    k += 1
    oe[k] = e
    os[k] = s
    of[k] = f
    return k


def combine(ent_a, ts_a, te_a, ent_b, ts_b, te_b, int op):
    cdef i64[::1] ae = np.ascontiguousarray(ent_a, dtype=np.int64)
    cdef i64[::1] as_ = np.ascontiguousarray(ts_a, dtype=np.int64)
    cdef i64[::1] af = np.ascontiguousarray(te_a, dtype=np.int64)
    cdef i64[::1] be = np.ascontiguousarray(ent_b, dtype=np.int64)
    cdef i64[::1] bs = np.ascontiguousarray(ts_b, dtype=np.int64)
    cdef i64[::1] bf = np.ascontiguousarray(te_b, dtype=np.int64)
    cdef Py_ssize_t na = ae.shape[0], nb = be.shape[0]
    cdef Py_ssize_t cap = 2 * (na + nb) + 1
    out_e = np.empty(cap, dtype=np.int64)
    out_s = np.empty(cap, dtype=np.int64)
    out_f = np.empty(cap, dtype=np.int64)
    cdef i64[::1] oe = out_e
    cdef i64[::1] os = out_s
    cdef i64[::1] of = out_f
    cdef Py_ssize_t i = 0, j = 0, k = -1
    cdef i64 cur, lo, hi
    with nogil:
        if op == 0:
            while i < na and j < nb:
                if ae[i] < be[j]:
                    i += 1
                elif be[j] < ae[i]:
                    j += 1
                else:
                    lo = _max(as_[i], bs[j])
                    hi = _min(af[i], bf[j])
                    if lo < hi:
                        k += 1
                        oe[k] = ae[i]
                        os[k] = lo
                        of[k] = hi
                    if af[i] < bf[j]:
                        i += 1
                    else:
                        j += 1
        elif op == 1:
            while i < na or j < nb:
                if j >= nb or (i < na and (ae[i] < be[j] or (ae[i] == be[j] and as_[i] <= bs[j]))):
                    k = _push(oe, os, of, k, ae[i], as_[i], af[i])
                    i += 1
                else:
                    k = _push(oe, os, of, k, be[j], bs[j], bf[j])
                    j += 1
        else:
            while i < na:
                cur = as_[i]
                while j < nb and (be[j] < ae[i] or (be[j] == ae[i] and bf[j] <= cur)):
                    j += 1
                while j < nb and be[j] == ae[i] and bs[j] < af[i]:
                    if bs[j] > cur:
                        k += 1
                        oe[k] = ae[i]
                        os[k] = cur
                        of[k] = bs[j]
                    if bf[j] > cur:
                        cur = bf[j]
                    if bf[j] >= af[i]:
                        break
                    j += 1
                if cur < af[i]:
                    k += 1
                    oe[k] = ae[i]
                    os[k] = cur
                    of[k] = af[i]
                i += 1
    return out_e[:k + 1].copy(), out_s[:k + 1].copy(), out_f[:k + 1].copy()


def csr_expand(ptr, items, sources):
    cdef i64[::1] p = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef i64[::1] it = np.ascontiguousarray(items, dtype=np.int64)
    cdef i64[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef Py_ssize_t n = src.shape[0], i, j, k = 0, total = 0
    for i in range(n):
        total += p[src[i] + 1] - p[src[i]]
    rep = np.empty(total, dtype=np.int64)
    val = np.empty(total, dtype=np.int64)
    cdef i64[::1] r = rep
    cdef i64[::1] v = val
    with nogil:
        for i in range(n):
            for j in range(p[src[i]], p[src[i] + 1]):
                r[k] = i
                v[k] = it[j]
                k += 1
    return rep, val


def overlap_pairs(q_ent, q_ts, q_te, s_ent, s_ts, s_te):
    cdef i64[::1] qe = np.ascontiguousarray(q_ent, dtype=np.int64)
    cdef i64[::1] qs = np.ascontiguousarray(q_ts, dtype=np.int64)
    cdef i64[::1] qf = np.ascontiguousarray(q_te, dtype=np.int64)
    se_arr = np.ascontiguousarray(s_ent, dtype=np.int64)
    cdef i64[::1] se = se_arr
    cdef i64[::1] ss = np.ascontiguousarray(s_ts, dtype=np.int64)
    cdef i64[::1] sf = np.ascontiguousarray(s_te, dtype=np.int64)
    cdef i64[::1] lo = np.searchsorted(se_arr, np.asarray(qe), side="left").astype(np.int64)
    cdef i64[::1] hi = np.searchsorted(se_arr, np.asarray(qe), side="right").astype(np.int64)
    cdef Py_ssize_t n = qe.shape[0], i, j, k = 0, total = 0
    for i in range(n):
        for j in range(lo[i], hi[i]):
            if qs[i] < sf[j] and ss[j] < qf[i]:
                total += 1
    out_q = np.empty(total, dtype=np.int64)
    out_s = np.empty(total, dtype=np.int64)
    cdef i64[::1] oq = out_q
    cdef i64[::1] os = out_s
    with nogil:
        for i in range(n):
            for j in range(lo[i], hi[i]):
                if qs[i] < sf[j] and ss[j] < qf[i]:
                    oq[k] = i
                    os[k] = j
                    k += 1
    return out_q, out_s


def relate_arrays(a_ts, a_te, b_ts, b_te, int code):
    cdef i64[::1] as_ = np.ascontiguousarray(a_ts, dtype=np.int64)
    cdef i64[::1] af = np.ascontiguousarray(a_te, dtype=np.int64)
    cdef i64[::1] bs = np.ascontiguousarray(b_ts, dtype=np.int64)
    cdef i64[::1] bf = np.ascontiguousarray(b_te, dtype=np.int64)
    cdef Py_ssize_t n = as_.shape[0], i
    out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    if code < 0 or code > 8:
        raise ValueError(code)
    # one branch-free loop per comparator so the compiler can vectorise it
    with nogil:
        if code == 0:
            for i in range(n):
                o[i] = af[i] <= bs[i]
        elif code == 1:
            for i in range(n):
                o[i] = as_[i] < bs[i]
        elif code == 2:
            for i in range(n):
                o[i] = as_[i] >= bf[i]
        elif code == 3:
            for i in range(n):
                o[i] = as_[i] > bs[i]
        elif code == 4:
            for i in range(n):
                o[i] = (bs[i] <= as_[i]) & (af[i] <= bf[i]) & ((as_[i] != bs[i]) | (af[i] != bf[i]))
        elif code == 5:
            for i in range(n):
                o[i] = (as_[i] == bs[i]) & (af[i] == bf[i])
        elif code == 6:
            for i in range(n):
                o[i] = (bs[i] <= as_[i]) & (af[i] <= bf[i])
        elif code == 7:
            for i in range(n):
                o[i] = (as_[i] < bf[i]) & (bs[i] < af[i])
        else:
            for i in range(n):
                o[i] = (as_[i] >= bf[i]) | (bs[i] >= af[i])
    return out.view(np.bool_)
