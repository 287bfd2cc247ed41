"""Vectorised predicate evaluation producing interval sets.

``evaluate(g, kind, pred, cand)`` returns the maximal slices ``(ent, ts, te)``
on which each candidate entity satisfies ``pred``. Property clauses reduce to
unions of property-record intervals; AND/OR/NEQ become interval-set algebra.
"""
from __future__ import annotations

import numpy as np

from . import kernels as K
from .graph import TYPE_KEY, VERTEX, TemporalGraph
from .query import BoolExpr, Predicate, PropClause

_EMPTY = np.zeros(0, dtype=np.int64)


def _empty():
    return _EMPTY, _EMPTY, _EMPTY


def _lifespans(g: TemporalGraph, kind: str, cand: np.ndarray):
    if kind == VERTEX:
        return cand, g.v_ts[cand], g.v_te[cand]
    return cand, g.e_ts[cand], g.e_te[cand]


def _select(ent, ts, te, mask):
    return ent[mask], ts[mask], te[mask]


def _records(g: TemporalGraph, kind: str, key_code: int, cand: np.ndarray):
    """Property records of ``key_code`` owned by candidates, as (owner, value, ts, te)."""
    col = g.props(kind).get(key_code)
    if col is None or not len(cand):
        return _EMPTY, _EMPTY, _EMPTY, _EMPTY
    _, rec = K.csr_expand(col.ptr, np.arange(len(col.owner), dtype=np.int64), cand)
    return col.owner[rec], col.value[rec], col.ts[rec], col.te[rec]


def _clause(g: TemporalGraph, kind: str, c: PropClause, cand: np.ndarray, life):
    if c.key == TYPE_KEY:
        codes = g.schema.type_codes(kind)
        types = (g.v_type if kind == VERTEX else g.e_type)[cand]
        code = codes.get(c.value, -1)
        mask = types == code if c.op == "==" else types != code
        return _select(*life, mask)
    key_code = c.key_code if c.key_code is not None else g.schema.key_codes.get(c.key, -1)
    owner, value, ts, te = _records(g, kind, key_code, cand)
    vcode = g.pool.code(c.value)
    eq = value == vcode
    if c.op == "!=":
        # some value is active and none of the active values equals the literal
        all_ = K.normalize(owner, ts, te)
        hit = K.normalize(owner[eq], ts[eq], te[eq])
        return K.combine(*all_, *hit, K.ANDNOT)
    return K.normalize(owner[eq], ts[eq], te[eq])


def _expr(g, kind, e, cand, life):
    if isinstance(e, PropClause):
        return _clause(g, kind, e, cand, life)
    assert isinstance(e, BoolExpr)
    left = _expr(g, kind, e.left, cand, life)
    if e.op == "AND":
        if not len(left[0]):
            return left
        # narrow the right side to entities still alive on the left
        sub = np.unique(left[0])
        right = _expr(g, kind, e.right, sub, _lifespans(g, kind, sub))
        return K.combine(*left, *right, K.AND)
    right = _expr(g, kind, e.right, cand, life)
    return K.combine(*left, *right, K.OR)


def evaluate(g: TemporalGraph, kind: str, pred: Predicate, cand: np.ndarray):
    """Slices of ``cand`` (sorted unique entity indices) matching ``pred``."""
    cand = np.asarray(cand, dtype=np.int64)
    if not len(cand):
        return _empty()
    life = _lifespans(g, kind, cand)
    if pred.time is not None:
        iv = pred.time.interval
        n = len(cand)
        ok = K.relate_arrays(life[1], life[2], np.full(n, iv.ts, np.int64), np.full(n, iv.te, np.int64),
                             K.CMP_CODES[pred.time.cmp.name])
        ok = np.asarray(ok, dtype=bool)
        cand = cand[ok]
        life = _select(*life, ok)
        if not len(cand):
            return _empty()
    if pred.expr is None:
        return life[0].copy(), life[1].copy(), life[2].copy()
    return _expr(g, kind, pred.expr, cand, life)
