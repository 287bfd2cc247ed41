"""Hand-built graphs and count tables shared by several test modules."""
import json

import numpy as np

from tempograph.graph import load_graph
from tempograph.intervals import intersect, time_warp, union_all
from tempograph.query import parse

# entity counts per (Country value, 10-unit time bucket)
COUNTRY_ROWS = {"India": [9, 10, 12, 9, 14], "UK": [20, 20, 21, 21, 14], "US": [5] * 5}
COUNTRY_THETA = 1.5

# per-superstep estimates of two plans for a two-hop query; the second step runs no scatter
PLAN_TABLES = {
    "left-to-right": [
        dict(a=1e5, sel=3.7e-2, m=3.7e3, abar=6.2e6, mbar=1.3e6),
        dict(a=1.3e6, m=1e3, scatters=False),
    ],
    "right-to-left": [
        dict(a=51e6, m=39e3, abar=273e3, mbar=67e3),
        dict(a=67e3, m=2.5e3, scatters=False),
    ],
}


def country_graph(rows=COUNTRY_ROWS, width: int = 10):
    """One short-lived Person per counted entity, holding its Country for one bucket."""
    recs = [{"kind": "schema", "vertex_types": {"Person": ["Country"]}, "edge_types": {"knows": []},
             "multi_valued": []}]
    vid = 0
    for country, counts in rows.items():
        for b, n in enumerate(counts):
            span = [width * b, width * (b + 1)]
            for _ in range(n):
                recs.append({"kind": "vertex", "vid": vid, "type": "Person", "lifespan": span})
                recs.append({"kind": "vprop", "owner": vid, "key": "Country", "value": country, "lifespan": span})
                vid += 1
    return load_graph(json.dumps(r) for r in recs)


def fan_in_chain(h: int):
    """Complete binary tree of height ``h`` with every edge pointing at the parent.

    Leaves have level 0 and the root level ``h``."""
    recs = [{"kind": "schema", "vertex_types": {"N": ["level"]}, "edge_types": {"up": []}, "multi_valued": []}]
    n = 2 ** (h + 1) - 1
    for v in range(n):
        level = h - int(np.floor(np.log2(v + 1)))
        recs.append({"kind": "vertex", "vid": v, "type": "N", "lifespan": [0, 10]})
        recs.append({"kind": "vprop", "owner": v, "key": "level", "value": level, "lifespan": [0, 10]})
    for v in range(1, n):
        recs.append({"kind": "edge", "eid": 10_000 + v, "type": "up", "src": v, "dst": (v - 1) // 2,
                     "lifespan": [0, 10]})
    return load_graph(json.dumps(r) for r in recs)


def chain_query(h: int):
    parts = ['{level==0}']
    for lvl in range(1, h + 1):
        parts.append('-[Type=="up"]-> {level==%d}' % lvl)
    return parse(" ".join(parts))


def check_time_warp(items):
    out = time_warp(items)
    pieces = [iv for iv, _ in out]
    # disjoint and sorted
    for p, q in zip(pieces, pieces[1:]):
        assert p.te <= q.ts
    # union preserving
    assert union_all(pieces) == union_all(iv for iv, _ in items)
    # containment: a payload is attached exactly when its interval covers the piece
    for iv, payload in out:
        expected = [lbl for span, lbl in items if span[0] <= iv.ts and iv.te <= span[1]]
        assert payload == expected
        for span, lbl in items:
            if lbl not in payload:
                assert intersect(span, iv) is None
    # maximal: adjacent pieces with identical membership would have been merged
    for (p, a), (q, b) in zip(out, out[1:]):
        assert not (p.te == q.ts and a == b)
    # idempotent: warping the output pieces again returns them unchanged
    again = time_warp([(iv, i) for i, (iv, _) in enumerate(out)])
    assert [iv for iv, _ in again] == pieces
