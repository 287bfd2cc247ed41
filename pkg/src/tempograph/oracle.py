"""Exhaustive reference evaluator for path queries.

Semantics shared with the engine:

* A vertex (edge) *slice* is a maximal interval of the entity's lifespan on
  which its predicate holds; property clauses are evaluated per instant, time
  clauses against the entity's whole lifespan.
* A binding ``(v1,s1) e1 (v2,s2) ... (vn,sn)`` matches when, for every hop,
  the two vertex slices and an edge slice share an instant, and every ETR
  clause holds between the *full* lifespans of the edges around its vertex.
  Hops may sit at different times (no global time ordering is imposed).
* A result is the vertex/edge ID sequence plus the first hop's common
  interval; results form a set.
* Aggregates group results per first vertex, split its time axis at every
  result boundary, and emit one row per maximal run with a constant value.

Nothing here shares code with the engine beyond the graph accessors and
the interval primitives.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .graph import EDGE, TYPE_KEY, VERTEX, TemporalGraph
from .intervals import Interval, relate
from .query import BoolExpr, Direction, Predicate, PathQuery, PropClause

DEFAULT_GUARD = 100_000


class OracleGuardError(RuntimeError):
    """The search would exceed the configured number of partial paths."""


@dataclass
class OracleResult:
    paths: list[tuple[tuple[int, ...], Interval]] = field(default_factory=list)
    aggregates: list[tuple[int, Interval, Any]] | None = None

    def canonical(self):
        if self.aggregates is not None:
            return sorted(self.aggregates, key=_agg_key)
        return sorted(self.paths)


def _agg_key(row):
    vid, iv, val = row
    return (vid, iv, (type(val).__name__, val))


def _eval_segment(g: TemporalGraph, kind: str, idx: int, expr, active: dict[str, set[Any]]) -> bool:
    if isinstance(expr, BoolExpr):
        left = _eval_segment(g, kind, idx, expr.left, active)
        if expr.op == "AND":
            return left and _eval_segment(g, kind, idx, expr.right, active)
        return left or _eval_segment(g, kind, idx, expr.right, active)
    clause: PropClause = expr
    if clause.key == TYPE_KEY:
        types = g.v_type if kind == VERTEX else g.e_type
        name = g.type_name(kind, int(types[idx]))
        return (name == clause.value) if clause.op == "==" else (name != clause.value)
    vals = active.get(clause.key, set())
    if clause.op == "!=":
        return bool(vals) and clause.value not in vals
    return clause.value in vals


def entity_slices(g: TemporalGraph, kind: str, idx: int, pred: Predicate) -> list[Interval]:
    """Maximal intervals on which entity ``idx`` satisfies ``pred``."""
    if kind == VERTEX:
        life = (int(g.v_ts[idx]), int(g.v_te[idx]))
    else:
        life = (int(g.e_ts[idx]), int(g.e_te[idx]))
    if pred.time is not None and not relate(life, pred.time.interval, pred.time.cmp):
        return []
    if pred.expr is None:
        return [Interval(*life)]
    keys = {c.key for c in pred.clauses() if c.key != TYPE_KEY}
    records = []
    for key in keys:
        col = g.props(kind).get(g.schema.key_codes.get(key, -1))
        if col is None:
            continue
        lo, hi = int(col.ptr[idx]), int(col.ptr[idx + 1])
        for r in range(lo, hi):
            records.append((key, g.pool.values[int(col.value[r])], int(col.ts[r]), int(col.te[r])))
    cuts = sorted({life[0], life[1]} | {t for _, _, a, b in records for t in (a, b) if life[0] < t < life[1]})
    out: list[Interval] = []
    for a, b in zip(cuts, cuts[1:]):
        active: dict[str, set[Any]] = {}
        for key, val, rs, re_ in records:
            if rs <= a and b <= re_:
                active.setdefault(key, set()).add(val)
        if _eval_segment(g, kind, idx, pred.expr, active):
            if out and out[-1].te == a:
                out[-1] = Interval(out[-1].ts, b)
            else:
                out.append(Interval(a, b))
    return out


def _incident(g: TemporalGraph, v: int, direction: Direction):
    """(edge index, neighbour index) pairs in the declared direction."""
    if direction in (Direction.OUT, Direction.BOTH):
        for k in range(int(g.out_ptr[v]), int(g.out_ptr[v + 1])):
            e = int(g.out_edges[k])
            yield e, int(g.e_dst[e])
    if direction in (Direction.IN, Direction.BOTH):
        for k in range(int(g.in_ptr[v]), int(g.in_ptr[v + 1])):
            e = int(g.in_edges[k])
            yield e, int(g.e_src[e])


def _common(*ivs):
    lo = max(iv[0] for iv in ivs)
    hi = min(iv[1] for iv in ivs)
    return Interval(lo, hi) if lo < hi else None


def brute_force(g: TemporalGraph, q: PathQuery, guard: int = DEFAULT_GUARD) -> OracleResult:
    n = q.n
    vcache: list[dict[int, list[Interval]]] = [dict() for _ in range(n)]
    ecache: list[dict[int, list[Interval]]] = [dict() for _ in range(n - 1)]

    def vslices(pos, v):
        c = vcache[pos]
        if v not in c:
            c[v] = entity_slices(g, VERTEX, v, q.vertices[pos])
        return c[v]

    def eslices(pos, e):
        c = ecache[pos]
        if e not in c:
            c[e] = entity_slices(g, EDGE, e, q.edges[pos].predicate)
        return c[e]

    results: set[tuple[tuple[int, ...], Interval]] = set()
    last_slices: dict[tuple[tuple[int, ...], Interval], set[tuple[int, Interval]]] = {}
    budget = [0]

    def extend(pos, ids, slice_, first_valid, prev_edge):
        # ids ends with the vertex at position pos, matched on slice_
        if pos == n - 1:
            key = (tuple(int(x) for x in ids), first_valid)
            results.add(key)
            last_slices.setdefault(key, set()).add((ids[-1], slice_))
            return
        budget[0] += 1
        if budget[0] > guard:
            raise OracleGuardError(f"more than {guard} partial paths")
        v = ids[-1]
        etr = q.etr[pos]
        for e, w in _incident(g, v, q.edges[pos].direction):
            if etr is not None:
                el = (int(g.e_ts[prev_edge]), int(g.e_te[prev_edge]))
                er = (int(g.e_ts[e]), int(g.e_te[e]))
                if not relate(el, er, etr):
                    continue
            for t in eslices(pos, e):
                for s_next in vslices(pos + 1, w):
                    hop = _common(slice_, t, s_next)
                    if hop is None:
                        continue
                    fv = hop if pos == 0 else first_valid
                    extend(pos + 1, ids + [e, w], s_next, fv, e)

    for v in range(g.num_vertices):
        for s in vslices(0, v):
            extend(0, [v], s, None, None)

    # translate internal indices to external IDs
    def ext(ids):
        return tuple(int(g.v_id[x]) if i % 2 == 0 else int(g.e_id[x]) for i, x in enumerate(ids))

    paths = sorted((ext(ids), iv) for ids, iv in results)
    res = OracleResult(paths=paths)
    if q.aggregate is not None:
        res.aggregates = _aggregate(g, q, results, last_slices)
    return res


def _aggregate(g, q, results, last_slices):
    agg = q.aggregate
    items: dict[int, list[tuple[Interval, Any]]] = {}
    for key in results:
        ids, valid = key
        if agg.op == "count":
            val = 1
        else:
            vals = []
            code = g.schema.key_codes.get(agg.key)
            col = g.vprops.get(code)
            for v, s in last_slices[key]:
                if col is None:
                    continue
                for r in range(int(col.ptr[v]), int(col.ptr[v + 1])):
                    if int(col.ts[r]) < s.te and s.ts < int(col.te[r]):
                        vals.append(g.pool.values[int(col.value[r])])
            if not vals:
                continue
            val = _pick(vals, agg.op)
        items.setdefault(int(g.v_id[ids[0]]), []).append((valid, val))

    rows = []
    for vid, its in sorted(items.items()):
        cuts = sorted({t for iv, _ in its for t in iv})
        run = None
        for a, b in zip(cuts, cuts[1:]):
            inside = [val for iv, val in its if iv.ts <= a and b <= iv.te]
            if not inside:
                if run:
                    rows.append(run)
                run = None
                continue
            value = len(inside) if agg.op == "count" else _pick(inside, agg.op)
            if run and run[1].te == a and run[2] == value:
                run = (vid, Interval(run[1].ts, b), value)
            else:
                if run:
                    rows.append(run)
                run = (vid, Interval(a, b), value)
        if run:
            rows.append(run)
    return sorted(rows, key=_agg_key)


def _order(v):
    return (0, v, "") if isinstance(v, int) else (1, 0, v)


def _pick(vals, op):
    return min(vals, key=_order) if op == "min" else max(vals, key=_order)
