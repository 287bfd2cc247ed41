"""Pure numpy implementations of the hot kernels.

An interval set is three parallel int64 arrays ``(ent, ts, te)`` sorted by
``(ent, ts)``, with the intervals of one entity pairwise disjoint and
non-adjacent. Every function here has a twin in ``_kernels.pyx``.
"""
from __future__ import annotations

import numpy as np

AND, OR, ANDNOT = 0, 1, 2

_EMPTY = np.zeros(0, dtype=np.int64)


def _empty3():
    return _EMPTY.copy(), _EMPTY.copy(), _EMPTY.copy()


def _coverage(ent_a, ts_a, te_a, ent_b, ts_b, te_b, op):
    n_a, n_b = len(ent_a), len(ent_b)
    ent = np.concatenate((ent_a, ent_a, ent_b, ent_b))
    t = np.concatenate((ts_a, te_a, ts_b, te_b))
    if not len(ent):
        return _empty3()
    da = np.concatenate((np.ones(n_a, np.int64), -np.ones(n_a, np.int64), np.zeros(2 * n_b, np.int64)))
    db = np.concatenate((np.zeros(2 * n_a, np.int64), np.ones(n_b, np.int64), -np.ones(n_b, np.int64)))
    order = np.lexsort((t, ent))
    ent, t, da, db = ent[order], t[order], da[order], db[order]
    # collapse events at the same (ent, t)
    first = np.ones(len(ent), dtype=bool)
    first[1:] = (ent[1:] != ent[:-1]) | (t[1:] != t[:-1])
    starts = np.flatnonzero(first)
    ent, t = ent[starts], t[starts]
    ca = np.cumsum(np.add.reduceat(da, starts))
    cb = np.cumsum(np.add.reduceat(db, starts))
    if op == AND:
        on = (ca > 0) & (cb > 0)
    elif op == OR:
        on = (ca > 0) | (cb > 0)
    else:
        on = (ca > 0) & (cb == 0)
    # region k spans [t[k], t[k+1]) when both events belong to the same entity
    same_next = np.zeros(len(ent), dtype=bool)
    same_next[:-1] = ent[1:] == ent[:-1]
    sel = on & same_next
    if not sel.any():
        return _empty3()
    prev_sel = np.zeros(len(ent), dtype=bool)
    prev_sel[1:] = sel[:-1] & same_next[:-1]
    run_start = sel & ~prev_sel
    next_sel = np.zeros(len(ent), dtype=bool)
    next_sel[:-1] = sel[1:]
    run_end = sel & ~(next_sel & same_next)
    s_idx = np.flatnonzero(run_start)
    e_idx = np.flatnonzero(run_end)
    return ent[s_idx].copy(), t[s_idx].copy(), t[e_idx + 1].copy()


def normalize(ent, ts, te):
    """Union of possibly overlapping intervals, per entity."""
    return _coverage(ent, ts, te, _EMPTY, _EMPTY, _EMPTY, OR)


def combine(ent_a, ts_a, te_a, ent_b, ts_b, te_b, op):
    """AND / OR / ANDNOT of two normalized interval sets."""
    return _coverage(ent_a, ts_a, te_a, ent_b, ts_b, te_b, op)


def csr_expand(ptr, items, sources):
    """For each ``sources[i]`` emit ``(i, items[j])`` for j in its CSR row."""
    sources = np.asarray(sources, dtype=np.int64)
    lo = ptr[sources]
    counts = ptr[sources + 1] - lo
    total = int(counts.sum())
    if total == 0:
        return _EMPTY.copy(), _EMPTY.copy()
    rep = np.repeat(np.arange(len(sources), dtype=np.int64), counts)
    base = np.repeat(lo - np.cumsum(counts) + counts, counts)
    pos = base + np.arange(total, dtype=np.int64)
    return rep, items[pos]


def overlap_pairs(q_ent, q_ts, q_te, s_ent, s_ts, s_te):
    """All (i, j) with ``q_ent[i] == s_ent[j]`` and overlapping intervals.

    ``s_ent`` must be sorted ascending.
    """
    lo = np.searchsorted(s_ent, q_ent, side="left")
    hi = np.searchsorted(s_ent, q_ent, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return _EMPTY.copy(), _EMPTY.copy()
    qi = np.repeat(np.arange(len(q_ent), dtype=np.int64), counts)
    base = np.repeat(lo - np.cumsum(counts) + counts, counts)
    sj = base + np.arange(total, dtype=np.int64)
    keep = (q_ts[qi] < s_te[sj]) & (s_ts[sj] < q_te[qi])
    return qi[keep], sj[keep]


def relate_arrays(a_ts, a_te, b_ts, b_te, code):
    """Vectorised interval comparator; ``code`` indexes ``CMP_CODES``."""
    if code == 0:  # fully before
        return a_te <= b_ts
    if code == 1:  # starts before
        return a_ts < b_ts
    if code == 2:  # fully after
        return a_ts >= b_te
    if code == 3:  # starts after
        return a_ts > b_ts
    if code == 4:  # during
        return (b_ts <= a_ts) & (a_te <= b_te) & ~((a_ts == b_ts) & (a_te == b_te))
    if code == 5:  # equals
        return (a_ts == b_ts) & (a_te == b_te)
    if code == 6:  # during or equals
        return (b_ts <= a_ts) & (a_te <= b_te)
    if code == 7:  # overlaps
        return (a_ts < b_te) & (b_ts < a_te)
    if code == 8:
        return ~((a_ts < b_te) & (b_ts < a_te))
    raise ValueError(code)
