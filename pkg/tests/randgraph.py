"""Small random temporal graphs and queries for differential tests."""
from __future__ import annotations

import json

import numpy as np

from tempograph.graph import load_graph
from tempograph.intervals import Cmp, Interval
from tempograph.query import (Aggregate, BoolExpr, Direction, EdgePredicate, PathQuery, Predicate,
                              PropClause, TimeClause)

SCHEMA = {
    "kind": "schema",
    "vertex_types": {"A": ["color", "tag"], "B": ["color", "size"]},
    "edge_types": {"x": ["w"], "y": []},
    "multi_valued": ["tag"],
}
COLORS = ["red", "green", "blue"]
TAGS = ["t1", "t2", "t3"]
TIME_CMPS = [Cmp.FULLY_BEFORE, Cmp.STARTS_BEFORE, Cmp.FULLY_AFTER, Cmp.STARTS_AFTER,
             Cmp.OVERLAPS, Cmp.NOT_OVERLAPS]


def _span(rng, lo, hi):
    a = int(rng.integers(lo, hi - 1))
    b = int(rng.integers(a + 1, hi + 1))
    return [a, b]


def random_records(seed: int, nv: int = 12, ne: int = 30, horizon: int = 20, dynamic: bool = True):
    rng = np.random.default_rng(seed)
    recs = [SCHEMA]
    spans = {}
    for v in range(nv):
        t = "A" if rng.random() < 0.5 else "B"
        span = _span(rng, 0, horizon) if dynamic or rng.random() < 0.5 else [0, horizon]
        spans[v] = (t, span)
        recs.append({"kind": "vertex", "vid": v, "type": t, "lifespan": span})

        def prop(key, value, sp, owner=v):
            recs.append({"kind": "vprop", "owner": owner, "key": key, "value": value, "lifespan": sp})

        if dynamic and span[1] - span[0] >= 2 and rng.random() < 0.7:
            cut = int(rng.integers(span[0] + 1, span[1]))
            prop("color", str(rng.choice(COLORS)), [span[0], cut])
            if rng.random() < 0.8:
                prop("color", str(rng.choice(COLORS)), [cut, span[1]])
        elif rng.random() < 0.9:
            prop("color", str(rng.choice(COLORS)), span)
        if t == "A":
            for tag in TAGS:
                if rng.random() < 0.4:
                    prop("tag", tag, _span(rng, span[0], span[1]) if dynamic and span[1] - span[0] > 1 else span)
        else:
            prop("size", int(rng.integers(1, 4)), span)
    eid = 0
    for _ in range(ne):
        s, d = int(rng.integers(nv)), int(rng.integers(nv))
        lo = max(spans[s][1][0], spans[d][1][0])
        hi = min(spans[s][1][1], spans[d][1][1])
        if hi - lo < 1:
            continue
        et = "x" if rng.random() < 0.6 else "y"
        span = _span(rng, lo, hi) if hi - lo > 1 else [lo, hi]
        recs.append({"kind": "edge", "eid": 1000 + eid, "type": et, "src": s, "dst": d, "lifespan": span})
        if et == "x":
            recs.append({"kind": "eprop", "owner": 1000 + eid, "key": "w", "value": int(rng.integers(1, 3)),
                         "lifespan": span})
        eid += 1
    return recs


def random_graph(seed: int, **kw):
    return load_graph(json.dumps(r) for r in random_records(seed, **kw))


def _vertex_pred(rng) -> Predicate:
    r = rng.random()
    time = None
    if rng.random() < 0.15:
        time = TimeClause(TIME_CMPS[int(rng.integers(len(TIME_CMPS)))], Interval.of(*_span(rng, 0, 20)))
    if r < 0.25:
        return Predicate(time=time)
    t = "A" if rng.random() < 0.5 else "B"
    clauses = [PropClause("Type", "==" if rng.random() < 0.85 else "!=", t)]
    if rng.random() < 0.6:
        op = ["==", "!=", "CONTAINS"][int(rng.integers(3))]
        clauses.append(PropClause("color", op, str(rng.choice(COLORS))))
    if t == "A" and clauses[0].op == "==" and rng.random() < 0.4:
        clauses.append(PropClause("tag", "CONTAINS", str(rng.choice(TAGS))))
    expr = clauses[-1]
    for c in reversed(clauses[:-1]):
        expr = BoolExpr("AND" if rng.random() < 0.75 else "OR", c, expr)
    return Predicate(time=time, expr=expr)


def _edge_pred(rng) -> EdgePredicate:
    d = [Direction.OUT, Direction.IN, Direction.BOTH][int(rng.integers(3))]
    r = rng.random()
    if r < 0.3:
        return EdgePredicate(Predicate(), d)
    if r < 0.8:
        return EdgePredicate(Predicate(expr=PropClause("Type", "==", "x" if rng.random() < 0.6 else "y")), d)
    return EdgePredicate(Predicate(expr=BoolExpr("AND", PropClause("Type", "==", "x"),
                                                 PropClause("w", "==", int(rng.integers(1, 3))))), d)


def random_query(seed: int, n: int | None = None, aggregate: bool | None = None) -> PathQuery:
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 6))
    verts = tuple(_vertex_pred(rng) for _ in range(n))
    edges = tuple(_edge_pred(rng) for _ in range(n - 1))
    etr = [None] * n
    for i in range(1, n - 1):
        if rng.random() < 0.35:
            etr[i] = TIME_CMPS[int(rng.integers(len(TIME_CMPS)))]
    agg = None
    if aggregate or (aggregate is None and rng.random() < 0.2):
        last = verts[-1].bound_type
        if last == "B" and rng.random() < 0.6:
            agg = Aggregate("min" if rng.random() < 0.5 else "max", "size")
        elif rng.random() < 0.5:
            agg = Aggregate("max", "color")
        else:
            agg = Aggregate("count")
    return PathQuery(verts, edges, tuple(etr), agg)
