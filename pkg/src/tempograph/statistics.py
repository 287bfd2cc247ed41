"""Value x time frequency histograms, tiled and indexed for selectivity lookups.

Each (kind, type, key) gets a 2-D histogram whose cell (v, t) counts the
entities carrying value v at some point of time bucket t, along with the mean
in/out degree of those entities (vertices only). Rows of high-cardinality keys
are grouped by frequency, then the grid is cut into rectangles whose cell
frequencies vary by no more than a threshold. Tiles are indexed by an interval
tree over their time ranges.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Any

import numpy as np

from .graph import EDGE, TYPE_KEY, VERTEX, TemporalGraph
from .intervals import INFINITY, Cmp, Interval

TYPE_BUCKETS = 50
PROPERTY_BUCKETS = 12
MAX_CLUSTERS = 16
MAX_PAIR_CELLS = 4096  # largest value-pair domain kept in the joint owner counts
THETA_FACTOR = 0.05
FORMAT = 1


class StatsError(ValueError):
    pass


def horizon(g: TemporalGraph) -> int:
    """One past the last finite time point mentioned by any vertex or edge."""
    lo = int(g.v_ts.min()) if g.num_vertices else 0
    hi = lo + 1
    for starts, ends in ((g.v_ts, g.v_te), (g.e_ts, g.e_te)):
        if len(starts):
            hi = max(hi, int(starts.max()) + 1)
            fin = ends[ends < INFINITY]
            if len(fin):
                hi = max(hi, int(fin.max()))
    return hi


def time_edges(lo: int, hi: int, buckets: int) -> np.ndarray:
    width = max(1, math.ceil((hi - lo) / buckets))
    edges = np.arange(lo, hi, width, dtype=np.int64)
    return np.append(edges, hi)


# -- histograms ---------------------------------------------------------------


@dataclass
class Histogram2D:
    kind: str
    type_name: str
    key: str
    values: list  # row labels; a cluster row lists its members in ``members``
    edges: np.ndarray  # time bucket boundaries, len = buckets + 1
    f: np.ndarray  # (rows, buckets) entity counts
    din: np.ndarray | None = None  # mean in-degree per cell
    dout: np.ndarray | None = None
    members: list[list] | None = None  # values grouped in each row
    owners: np.ndarray | None = None  # distinct entities per row over the whole lifespan

    def __post_init__(self) -> None:
        if self.members is None:
            self.members = [[v] for v in self.values]

    @property
    def shape(self) -> tuple[int, int]:
        return self.f.shape

    def bucket(self, t: int) -> Interval:
        return Interval(int(self.edges[t]), int(self.edges[t + 1]))


def _clip(te: np.ndarray, hi: int) -> np.ndarray:
    return np.minimum(te, hi)


def _cells(values, owners, ts, te, edges, nrows, weights=()):
    """Count distinct owners per (row, bucket); also sums ``weights`` per cell."""
    nb = len(edges) - 1
    hi = int(edges[-1])
    te = _clip(te, hi)
    keep = te > ts
    values, owners, ts, te = values[keep], owners[keep], ts[keep], te[keep]
    weights = [w[keep] for w in weights]
    b0 = np.searchsorted(edges, ts, side="right") - 1
    b1 = np.searchsorted(edges, te - 1, side="right") - 1
    # a later record of the same (owner, value) must not recount a shared bucket
    order = np.lexsort((ts, owners, values))
    values, owners, b0, b1 = values[order], owners[order], b0[order], b1[order]
    weights = [w[order] for w in weights]
    if len(values) > 1:
        # records of one (owner, value) are disjoint and sorted, so the previous one ends last
        same = np.r_[False, (values[1:] == values[:-1]) & (owners[1:] == owners[:-1])]
        prev_end = np.where(same, np.r_[-1, b1[:-1]], -1)
        b0 = np.maximum(b0, prev_end + 1)
    ok = b0 <= b1
    out = []
    for w in [np.ones(len(values))] + weights:
        diff = np.zeros((nrows, nb + 1))
        np.add.at(diff, (values[ok], b0[ok]), w[ok])
        np.add.at(diff, (values[ok], b1[ok] + 1), -w[ok])
        out.append(np.cumsum(diff, axis=1)[:, :nb])
    return out


def _degrees(g: TemporalGraph) -> tuple[np.ndarray, np.ndarray]:
    return g.in_deg.astype(np.float64), g.out_deg.astype(np.float64)


def build_histogram(g: TemporalGraph, kind: str, type_name: str, key: str,
                    granularity: int | None = None) -> Histogram2D:
    """Histogram of ``key`` over entities of ``type_name``; ``Type`` counts live entities."""
    schema = g.schema
    tcodes = schema.type_codes(kind)
    if type_name not in tcodes:
        raise StatsError(f"unknown {kind} type {type_name!r}")
    if key != TYPE_KEY and key not in schema.keys_of(kind, type_name):
        raise StatsError(f"unknown key {key!r} for {kind} type {type_name!r}")
    lo, hi = g.lifespan().ts, horizon(g)
    if granularity is None:
        nb = TYPE_BUCKETS if key == TYPE_KEY else PROPERTY_BUCKETS
        edges = time_edges(lo, hi, nb)
    else:
        edges = time_edges(lo, hi, max(1, math.ceil((hi - lo) / granularity)))
    types = g.v_type if kind == VERTEX else g.e_type
    code = tcodes[type_name]
    if key == TYPE_KEY:
        owners = np.flatnonzero(types == code)
        ts = (g.v_ts if kind == VERTEX else g.e_ts)[owners]
        te = (g.v_te if kind == VERTEX else g.e_te)[owners]
        vals = np.zeros(len(owners), dtype=np.int64)
        labels = [type_name]
    else:
        col = g.props(kind).get(schema.key_codes[key])
        if col is None:
            owners = vals = ts = te = np.zeros(0, dtype=np.int64)
        else:
            mine = types[col.owner] == code
            owners, ts, te = col.owner[mine], col.ts[mine], col.te[mine]
            codes = col.value[mine]
            uniq, vals = np.unique(codes, return_inverse=True)
            labels = [g.pool.values[int(c)] for c in uniq]
            # stable row order: ints first, then strings, each ascending
            order = sorted(range(len(labels)), key=lambda i: (isinstance(labels[i], str), labels[i]))
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order))
            vals = rank[vals] if len(vals) else vals.astype(np.int64)
            labels = [labels[i] for i in order]
        if col is None:
            labels = []
    nrows = len(labels)
    pairs = np.unique(np.stack([vals, owners]), axis=1) if len(owners) else np.zeros((2, 0), dtype=np.int64)
    ever = np.bincount(pairs[0], minlength=nrows).astype(np.float64)
    if kind == VERTEX:
        din, dout = _degrees(g)
        f, sin, sout = _cells(vals, owners, ts, te, edges, nrows, (din[owners], dout[owners]))
        with np.errstate(invalid="ignore", divide="ignore"):
            h_in = np.where(f > 0, sin / np.where(f > 0, f, 1), 0.0)
            h_out = np.where(f > 0, sout / np.where(f > 0, f, 1), 0.0)
        return Histogram2D(kind, type_name, key, labels, edges, f, h_in, h_out, owners=ever)
    (f,) = _cells(vals, owners, ts, te, edges, nrows)
    return Histogram2D(kind, type_name, key, labels, edges, f, owners=ever)


def cluster_values(h: Histogram2D, max_clusters: int = MAX_CLUSTERS) -> tuple[Histogram2D, dict]:
    """Group rows into at most ``max_clusters`` runs of similar total frequency.

    Rows are sorted by total frequency and cut at the largest gaps. Cluster
    rows hold summed frequencies; degrees become frequency-weighted means.
    Returns the new histogram and a map value -> cluster row.
    """
    rows = h.shape[0]
    if rows <= max_clusters:
        return h, {v: r for r, vs in enumerate(h.members) for v in vs}
    total = h.f.sum(axis=1)
    order = np.argsort(-total, kind="stable")
    gaps = total[order][:-1] - total[order][1:]
    cuts = np.sort(np.argsort(-gaps, kind="stable")[:max_clusters - 1]) + 1
    groups = np.split(order, cuts)
    f = np.stack([h.f[g].sum(axis=0) for g in groups])
    din = dout = None
    if h.din is not None:
        with np.errstate(invalid="ignore", divide="ignore"):
            din = np.stack([np.nan_to_num((h.f[g] * h.din[g]).sum(axis=0) / h.f[g].sum(axis=0)) for g in groups])
            dout = np.stack([np.nan_to_num((h.f[g] * h.dout[g]).sum(axis=0) / h.f[g].sum(axis=0)) for g in groups])
    members = [[v for r in g for v in h.members[r]] for g in groups]
    labels = [f"cluster{i}" for i in range(len(groups))]
    ever = None if h.owners is None else np.array([h.owners[g].sum() for g in groups])
    out = Histogram2D(h.kind, h.type_name, h.key, labels, h.edges.copy(), f, din, dout, members, ever)
    return out, {v: r for r, vs in enumerate(members) for v in vs}


# -- tiling -------------------------------------------------------------------


@dataclass
class Tile:
    rows: tuple[int, int]  # value rows [r0, r1)
    cols: tuple[int, int]  # time buckets [c0, c1)
    ts: int
    te: int
    f: float
    din: float = 0.0
    dout: float = 0.0

    @property
    def cells(self) -> int:
        return (self.rows[1] - self.rows[0]) * (self.cols[1] - self.cols[0])


def default_theta(h: Histogram2D) -> float:
    return THETA_FACTOR * float(h.f.mean()) ** 2 if h.f.size else 0.0


def _prefix(a: np.ndarray) -> np.ndarray:
    p = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    p[1:, 1:] = a.cumsum(0).cumsum(1)
    return p


def _box(p, h, w):
    """Sums of every h x w window, indexed by the window's top-left cell."""
    return p[h:, w:] - p[:-h, w:] - p[h:, :-w] + p[:-h, :-w]


def tile(h: Histogram2D, theta: float | None = None) -> list[Tile]:
    """Fewest guillotine rectangles whose cell-frequency variance is <= theta."""
    theta = default_theta(h) if theta is None else float(theta)
    if theta < 0:
        raise StatsError("theta must be non-negative")
    R, C = h.shape
    if R == 0 or C == 0:
        return []
    ps, ps2 = _prefix(h.f), _prefix(h.f * h.f)
    # best[(hh, ww)][r, c]: min tiles for the window at (r, c); choice > 0 cuts rows, < 0 cuts columns
    best: dict[tuple[int, int], np.ndarray] = {}
    choice: dict[tuple[int, int], np.ndarray] = {}
    for hh in range(1, R + 1):
        for ww in range(1, C + 1):
            n = hh * ww
            mean = _box(ps, hh, ww) / n
            var = _box(ps2, hh, ww) / n - mean * mean
            tol = 1e-9 * (1.0 + mean * mean)
            cost = np.where(var <= theta + tol, 1, np.iinfo(np.int64).max // 4).astype(np.int64)
            pick = np.zeros(cost.shape, dtype=np.int64)
            for k in range(1, hh):
                c = best[(k, ww)][:R - hh + 1, :] + best[(hh - k, ww)][k:k + R - hh + 1, :]
                better = c < cost
                cost = np.where(better, c, cost)
                pick = np.where(better, k, pick)
            for k in range(1, ww):
                c = best[(hh, k)][:, :C - ww + 1] + best[(hh, ww - k)][:, k:k + C - ww + 1]
                better = c < cost
                cost = np.where(better, c, cost)
                pick = np.where(better, -k, pick)
            best[(hh, ww)] = cost
            choice[(hh, ww)] = pick
    tiles: list[Tile] = []
    stack = [(0, 0, R, C)]
    while stack:
        r, c, hh, ww = stack.pop()
        k = int(choice[(hh, ww)][r, c])
        if k > 0:
            stack += [(r + k, c, hh - k, ww), (r, c, k, ww)]
        elif k < 0:
            stack += [(r, c - k, hh, ww + k), (r, c, hh, -k)]
        else:
            tiles.append(_make_tile(h, r, r + hh, c, c + ww))
    tiles.sort(key=lambda t: (t.rows, t.cols))
    return tiles


def _make_tile(h: Histogram2D, r0, r1, c0, c1) -> Tile:
    cells = h.f[r0:r1, c0:c1]
    f = float(cells.mean())
    din = dout = 0.0
    if h.din is not None:
        w = cells.sum()
        if w > 0:
            din = float((cells * h.din[r0:r1, c0:c1]).sum() / w)
            dout = float((cells * h.dout[r0:r1, c0:c1]).sum() / w)
    return Tile((r0, r1), (c0, c1), int(h.edges[c0]), int(h.edges[c1]), f, din, dout)


def tile_variance(h: Histogram2D, t: Tile) -> float:
    return float(h.f[t.rows[0]:t.rows[1], t.cols[0]:t.cols[1]].var())


# -- interval tree ------------------------------------------------------------


@dataclass
class _Node:
    ts: int
    te: int
    tiles: list[Tile]
    left: "_Node | None" = None
    right: "_Node | None" = None
    max_te: int = 0
    min_ts: int = 0


def _build(keys: list[tuple[int, int]], groups: dict) -> _Node | None:
    if not keys:
        return None
    mid = len(keys) // 2
    ts, te = keys[mid]
    node = _Node(ts, te, groups[keys[mid]], _build(keys[:mid], groups), _build(keys[mid + 1:], groups))
    node.max_te = max([te] + [c.max_te for c in (node.left, node.right) if c])
    node.min_ts = min([ts] + [c.min_ts for c in (node.left, node.right) if c])
    return node


@dataclass
class TileTree:
    """Balanced BST over distinct tile time ranges, ordered by (ts, te).

    Left subtrees hold ranges ordered before the node's, right subtrees after.
    Subtree extents let a stabbing query skip branches that cannot overlap.
    """

    hist: Histogram2D
    tiles: list[Tile]
    theta: float
    root: _Node | None = None
    value_row: dict = field(default_factory=dict)

    def stab(self, ts: int, te: int) -> list[Tile]:
        """Tiles whose time range overlaps [ts, te)."""
        out: list[Tile] = []
        stack = [self.root] if self.root else []
        while stack:
            n = stack.pop()
            if n.max_te <= ts or n.min_ts >= te:
                continue
            if n.ts < te and ts < n.te:
                out.extend(n.tiles)
            if n.left:
                stack.append(n.left)
            # right subtree starts no earlier than this node
            if n.right and n.ts < te:
                stack.append(n.right)
        return out

    def depth(self) -> int:
        def d(n):
            return 0 if n is None else 1 + max(d(n.left), d(n.right))
        return d(self.root)

    def shape(self) -> tuple:
        """Nested (interval, left, right) tuples, for inspection."""
        def s(n):
            return None if n is None else ((n.ts, n.te), s(n.left), s(n.right))
        return s(self.root)


def build_tree(h: Histogram2D, tiles: list[Tile], theta: float = 0.0, value_row: dict | None = None) -> TileTree:
    R, C = h.shape
    cover = np.zeros((R, C), dtype=np.int64)
    for t in tiles:
        cover[t.rows[0]:t.rows[1], t.cols[0]:t.cols[1]] += 1
    if (cover > 1).any():
        raise StatsError("tiles overlap in time for the same value range")
    if (cover == 0).any():
        raise StatsError("tiles do not cover the histogram")
    groups: dict[tuple[int, int], list[Tile]] = {}
    for t in tiles:
        groups.setdefault((t.ts, t.te), []).append(t)
    if value_row is None:
        value_row = {v: r for r, vs in enumerate(h.members) for v in vs}
    return TileTree(h, tiles, theta, _build(sorted(groups), groups), value_row)


# -- lookup -------------------------------------------------------------------


@dataclass
class Estimate:
    f: float
    din: float = 0.0
    dout: float = 0.0


def _row_key(tree: TileTree, value) -> int | None:
    return None if isinstance(value, bool) else tree.value_row.get(value)


def value_owners(tree: TileTree, value) -> float | None:
    """Entities that ever held ``value``; a cluster row is split evenly among its members."""
    h = tree.hist
    r = _row_key(tree, value)
    if h.owners is None or r is None:
        return None if h.owners is None else 0.0
    return float(h.owners[r]) / len(h.members[r])


def _sums(tree: TileTree, rows: set[int] | None, ts: int, te: int, scale: float = 1.0):
    """Duration-weighted sums over the matching tiles: (f*dur, f*din*dur, f*dout*dur)."""
    sf = sin = sout = 0.0
    for t in tree.stab(ts, te):
        nrows = t.rows[1] - t.rows[0] if rows is None else len(rows & set(range(*t.rows)))
        if not nrows:
            continue
        dur = min(te, t.te) - max(ts, t.ts)
        w = t.f * nrows * dur * scale
        sf += w
        sin += w * t.din
        sout += w * t.dout
    return sf, sin, sout


def _result(sf, sin, sout, dur) -> Estimate:
    if sf <= 0:
        return Estimate(0.0)
    return Estimate(sf / dur, sin / sf, sout / sf)


def lookup_H(tree: TileTree, value: Any = None, tau: tuple[int, int] | None = None,
             op: str = "==", cmp: Cmp | None = None) -> Estimate:
    """Estimated entity count carrying ``value`` during ``tau`` with degree means.

    ``value=None`` is the wildcard. ``op`` is ``==``, ``CONTAINS`` or ``!=``.
    With a comparator such as FULLY_BEFORE the frequencies of all buckets
    entirely earlier (or later) than ``tau`` are summed instead.
    """
    h = tree.hist
    lo, hi = int(h.edges[0]), int(h.edges[-1])
    ts, te = tau if tau is not None else (lo, hi)
    ts, te = max(ts, lo), min(te, hi)
    if cmp is not None:
        if cmp in (Cmp.FULLY_BEFORE, Cmp.STARTS_BEFORE):
            cols = [c for c in range(h.shape[1]) if h.edges[c + 1] <= ts]
        elif cmp in (Cmp.FULLY_AFTER, Cmp.STARTS_AFTER):
            cols = [c for c in range(h.shape[1]) if h.edges[c] >= te]
        else:
            raise StatsError(f"comparator {cmp.name} needs no bucket summation")
        sf = sin = sout = 0.0
        for c in cols:
            e = lookup_H(tree, value, (int(h.edges[c]), int(h.edges[c + 1])), op)
            sf += e.f
            sin += e.f * e.din
            sout += e.f * e.dout
        return _result(sf, sin, sout, 1)
    if te <= ts:
        return Estimate(0.0)
    dur = te - ts
    total = _sums(tree, None, ts, te)
    if value is None:
        return _result(*total, dur)
    r = _row_key(tree, value)
    if r is None:
        eq = (0.0, 0.0, 0.0)
    else:
        eq = _sums(tree, {r}, ts, te, 1.0 / len(h.members[r]))
    if op == "!=":
        return _result(max(total[0] - eq[0], 0.0), total[1] - eq[1], total[2] - eq[2], dur)
    return _result(*eq, dur)


def linear_lookup(tree: TileTree, value: Any, tau: tuple[int, int], op: str = "==") -> Estimate:
    """Same as ``lookup_H`` but scanning every tile; used to check the tree."""
    saved = tree.stab
    tree.stab = lambda ts, te: [t for t in tree.tiles if t.ts < te and ts < t.te]  # type: ignore[method-assign]
    try:
        return lookup_H(tree, value, tau, op)
    finally:
        tree.stab = saved  # type: ignore[method-assign]


# -- global statistics ----------------------------------------------------------


@dataclass
class GlobalStats:
    lifespan: tuple[int, int]
    vertex_count: dict[str, int]
    edge_count: dict[str, int]
    deg_in: dict[str, float]  # mean in-degree per vertex type
    deg_out: dict[str, float]
    # (vertex type, "in"/"out") -> edge type -> number of incident edges
    incident: dict[str, dict[str, int]]
    edges: list[int]  # time buckets for lifespan start/end counts
    starts: dict[str, list[int]]  # "kind:type" -> entities starting per bucket
    ends: dict[str, list[int]]
    # (vertex type, "in"/"out") -> "edge type>other end's vertex type" -> number of edges
    reach: dict[str, dict[str, int]] = field(default_factory=dict)

    def count(self, kind: str, type_name: str | None) -> int:
        table = self.vertex_count if kind == VERTEX else self.edge_count
        return sum(table.values()) if type_name is None else table.get(type_name, 0)

    def lifespan_fraction(self, kind: str, type_name: str | None, cmp: Cmp, tau: tuple[int, int]) -> float:
        """Fraction of the type's entities whose lifespan satisfies ``cmp`` against ``tau``."""
        names = [type_name] if type_name else list((self.vertex_count if kind == VERTEX else self.edge_count))
        total = sum(self.count(kind, t) for t in names)
        if not total:
            return 0.0
        edges = np.asarray(self.edges, dtype=np.float64)
        starts = sum(np.asarray(self.starts.get(f"{kind}:{t}", np.zeros(len(edges) - 1)), dtype=np.float64)
                     for t in names)
        ends = sum(np.asarray(self.ends.get(f"{kind}:{t}", np.zeros(len(edges) - 1)), dtype=np.float64)
                   for t in names)

        def before(counts, x, inclusive=False):
            # entities whose point falls before x, interpolating inside a bucket
            cum = np.concatenate(([0.0], np.cumsum(counts)))
            x = min(max(x, edges[0]), edges[-1])
            return float(np.interp(x + (1 if inclusive else 0), edges, cum))

        ts, te = tau
        n_end_before = before(ends, ts, inclusive=True)  # te <= tau.ts, ends stored as te - 1
        n_start_after = total - before(starts, te)  # ts >= tau.te
        if cmp is Cmp.FULLY_BEFORE:
            n = n_end_before
        elif cmp is Cmp.FULLY_AFTER:
            n = n_start_after
        elif cmp is Cmp.STARTS_BEFORE:
            n = before(starts, ts)
        elif cmp is Cmp.STARTS_AFTER:
            n = total - before(starts, ts, inclusive=True)
        elif cmp is Cmp.NOT_OVERLAPS:
            n = n_end_before + n_start_after
        else:
            n = total - n_end_before - n_start_after
        return min(max(n / total, 0.0), 1.0)


    def _point_hist(self, table: dict, types: list[str]) -> np.ndarray:
        nb = len(self.edges) - 1
        return sum((np.asarray(table.get(f"{EDGE}:{t}", np.zeros(nb)), dtype=np.float64) for t in types),
                   np.zeros(nb))

    def etr_fraction(self, left: list[str], right: list[str], cmp: Cmp) -> float:
        """Chance that ``cmp`` holds between independent edges of the ``left`` and ``right`` types.

        Start and end points are compared bucket by bucket; points sharing a bucket count half.
        """
        ls, rs = self._point_hist(self.starts, left), self._point_hist(self.starts, right)
        le, re = self._point_hist(self.ends, left), self._point_hist(self.ends, right)
        if ls.sum() <= 0 or rs.sum() <= 0:
            return 0.0

        def p_less(x, y):
            # P(X < Y) for bucketed X ~ x, Y ~ y
            x, y = x / x.sum(), y / y.sum()
            below = np.concatenate(([0.0], np.cumsum(x)[:-1]))
            return float((y * (below + 0.5 * x)).sum())

        p_before = p_less(le, rs)  # left ends before right starts
        p_after = p_less(re, ls)
        if cmp is Cmp.STARTS_BEFORE:
            return p_less(ls, rs)
        if cmp is Cmp.STARTS_AFTER:
            return p_less(rs, ls)
        if cmp is Cmp.FULLY_BEFORE:
            return p_before
        if cmp is Cmp.FULLY_AFTER:
            return p_after
        if cmp is Cmp.NOT_OVERLAPS:
            return min(p_before + p_after, 1.0)
        if cmp is Cmp.OVERLAPS:
            return max(1.0 - p_before - p_after, 0.0)
        return 1.0


def global_stats(g: TemporalGraph, buckets: int = TYPE_BUCKETS) -> GlobalStats:
    s = g.schema
    lo, hi = g.lifespan().ts, horizon(g)
    edges = time_edges(lo, hi, buckets)
    vc, ec, din, dout = {}, {}, {}, {}
    starts, ends = {}, {}
    incident: dict[str, dict[str, int]] = {}
    nb = len(edges) - 1

    def hist(points):
        idx = np.clip(np.searchsorted(edges, points, side="right") - 1, 0, nb - 1)
        return np.bincount(idx, minlength=nb).tolist()

    for code, t in enumerate(s.vertex_types):
        m = g.v_type == code
        vc[t] = int(m.sum())
        din[t] = float(g.in_deg[m].mean()) if vc[t] else 0.0
        dout[t] = float(g.out_deg[m].mean()) if vc[t] else 0.0
        starts[f"{VERTEX}:{t}"] = hist(g.v_ts[m])
        ends[f"{VERTEX}:{t}"] = hist(np.minimum(g.v_te[m], hi) - 1)
    for code, t in enumerate(s.edge_types):
        m = g.e_type == code
        ec[t] = int(m.sum())
        starts[f"{EDGE}:{t}"] = hist(g.e_ts[m])
        ends[f"{EDGE}:{t}"] = hist(np.minimum(g.e_te[m], hi) - 1)
    for end, label in ((g.e_src, "out"), (g.e_dst, "in")):
        pair = g.v_type[end] * len(s.edge_types) + g.e_type
        counts = np.bincount(pair, minlength=len(s.vertex_types) * len(s.edge_types))
        for vt_code, vt in enumerate(s.vertex_types):
            row = counts[vt_code * len(s.edge_types):(vt_code + 1) * len(s.edge_types)]
            incident[f"{vt}:{label}"] = {et: int(c) for et, c in zip(s.edge_types, row) if c}
    reach: dict[str, dict[str, int]] = {}
    nvt, net = len(s.vertex_types), len(s.edge_types)
    for end, other, label in ((g.e_src, g.e_dst, "out"), (g.e_dst, g.e_src, "in")):
        key = (g.v_type[end] * net + g.e_type) * nvt + g.v_type[other]
        counts = np.bincount(key, minlength=nvt * net * nvt)
        for i in np.flatnonzero(counts):
            vt, rest = divmod(int(i), net * nvt)
            et, ot = divmod(rest, nvt)
            reach.setdefault(f"{s.vertex_types[vt]}:{label}", {})[
                f"{s.edge_types[et]}>{s.vertex_types[ot]}"] = int(counts[i])
    return GlobalStats((lo, hi), vc, ec, din, dout, incident, edges.tolist(), starts, ends, reach)


def _held(g: TemporalGraph, kind: str, code: int, key: str) -> np.ndarray:
    """Distinct (owner, value code) pairs of ``key`` among entities of type ``code``."""
    col = g.props(kind).get(g.schema.key_codes[key])
    if col is None:
        return np.zeros((0, 2), dtype=np.int64)
    types = g.v_type if kind == VERTEX else g.e_type
    mine = types[col.owner] == code
    return np.unique(np.stack([col.owner[mine], col.value[mine]], axis=1), axis=0)


def joint_owners(g: TemporalGraph, kind: str, type_name: str, key_a: str, key_b: str,
                 max_cells: int = MAX_PAIR_CELLS) -> dict[tuple, int] | None:
    """Entities that ever held each (value of ``key_a``, value of ``key_b``) pair.

    Returns None when the value-pair domain exceeds ``max_cells``.
    """
    code = g.schema.type_codes(kind)[type_name]
    a = _held(g, kind, code, key_a)
    b = _held(g, kind, code, key_b)
    if len(np.unique(a[:, 1])) * len(np.unique(b[:, 1])) > max_cells:
        return None
    # join on owner: repeat every a-row once per b-row of the same owner
    lo = np.searchsorted(b[:, 0], a[:, 0], side="left")
    hi = np.searchsorted(b[:, 0], a[:, 0], side="right")
    n = hi - lo
    rows = np.repeat(np.arange(len(a)), n)
    offs = np.arange(len(rows)) - np.repeat(np.cumsum(n) - n, n)
    pairs = np.stack([a[rows, 1], b[lo[rows] + offs, 1]], axis=1)
    uniq, counts = np.unique(pairs, axis=0, return_counts=True) if len(pairs) else (pairs, [])
    vals = g.pool.values
    return {(vals[int(x)], vals[int(y)]): int(c) for (x, y), c in zip(uniq, counts)}


# -- the full statistics bundle -----------------------------------------------------


@dataclass
class GraphStats:
    graph_hash: str
    glob: GlobalStats
    trees: dict[tuple[str, str, str], TileTree]
    # (kind, type, key a, key b) -> (value a, value b) -> entities that ever held both
    pairs: dict[tuple[str, str, str, str], dict[tuple, int]] = field(default_factory=dict)

    def joint(self, kind: str, type_name: str, key_a: str, a, key_b: str, b) -> int | None:
        """Entities that ever held ``a`` and ``b``; None if the pair was not recorded."""
        t = self.pairs.get((kind, type_name, key_a, key_b))
        if t is not None:
            return t.get((a, b), 0)
        t = self.pairs.get((kind, type_name, key_b, key_a))
        return None if t is None else t.get((b, a), 0)

    def tree(self, kind: str, type_name: str, key: str) -> TileTree:
        t = self.trees.get((kind, type_name, key))
        if t is None:
            raise StatsError(f"no statistics for {kind} {type_name}.{key}")
        return t

    def to_json(self) -> dict:
        hists = []
        for (kind, tname, key), tr in sorted(self.trees.items()):
            h = tr.hist
            hists.append({
                "kind": kind, "type": tname, "key": key, "theta": tr.theta,
                "members": h.members, "edges": h.edges.tolist(), "shape": list(h.shape),
                "owners": None if h.owners is None else h.owners.tolist(),
                "tiles": [[t.rows[0], t.rows[1], t.cols[0], t.cols[1], round(t.f, 6),
                           round(t.din, 6), round(t.dout, 6)] for t in tr.tiles],
            })
        g = self.glob
        return {
            "format": FORMAT, "graph": self.graph_hash,
            "global": {
                "lifespan": list(g.lifespan), "vertex_count": g.vertex_count, "edge_count": g.edge_count,
                "deg_in": g.deg_in, "deg_out": g.deg_out, "incident": g.incident,
                "edges": g.edges, "starts": g.starts, "ends": g.ends, "reach": g.reach,
            },
            "histograms": hists,
            "pairs": [{"kind": k, "type": t, "keys": [ka, kb], "counts": [[a, b, n] for (a, b), n in tab.items()]}
                      for (k, t, ka, kb), tab in sorted(self.pairs.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GraphStats":
        if obj.get("format") != FORMAT:
            raise StatsError("unsupported statistics format")
        gj = obj["global"]
        glob = GlobalStats(tuple(gj["lifespan"]), gj["vertex_count"], gj["edge_count"], gj["deg_in"],
                           gj["deg_out"], gj["incident"], gj["edges"], gj["starts"], gj["ends"],
                           gj.get("reach", {}))
        trees = {}
        for hj in obj["histograms"]:
            rows, cols = hj["shape"]
            edges = np.asarray(hj["edges"], dtype=np.int64)
            kind = hj["kind"]
            tiles = [Tile((r0, r1), (c0, c1), int(edges[c0]), int(edges[c1]), f, di, do)
                     for r0, r1, c0, c1, f, di, do in hj["tiles"]]
            # cell values are not stored; rebuild them from the tiles
            f = np.zeros((rows, cols))
            din = np.zeros((rows, cols)) if kind == VERTEX else None
            dout = np.zeros((rows, cols)) if kind == VERTEX else None
            for t in tiles:
                sl = (slice(*t.rows), slice(*t.cols))
                f[sl] = t.f
                if din is not None:
                    din[sl] = t.din
                    dout[sl] = t.dout
            members = hj["members"]
            labels = [vs[0] if len(vs) == 1 else f"cluster{i}" for i, vs in enumerate(members)]
            ever = hj.get("owners")
            h = Histogram2D(kind, hj["type"], hj["key"], labels, edges, f, din, dout, members,
                            None if ever is None else np.asarray(ever, dtype=np.float64))
            trees[(kind, hj["type"], hj["key"])] = build_tree(h, tiles, hj["theta"])
        pairs = {(pj["kind"], pj["type"], pj["keys"][0], pj["keys"][1]): {(a, b): n for a, b, n in pj["counts"]}
                 for pj in obj.get("pairs", [])}
        return cls(obj["graph"], glob, trees, pairs)

    def dump(self, out: IO[str]) -> None:
        json.dump(self.to_json(), out, separators=(",", ":"))

    @classmethod
    def load(cls, src: IO[str]) -> "GraphStats":
        return cls.from_json(json.load(src))


def build_stats(g: TemporalGraph, theta: float | None = None, max_clusters: int = MAX_CLUSTERS,
                granularity: dict[str, int] | None = None) -> GraphStats:
    """Histograms, tiles and trees for every (kind, type, key) plus global counts.

    ``theta`` overrides the per-histogram default; ``granularity`` maps a key
    name to its bucket width in time units.
    """
    granularity = granularity or {}
    trees = {}
    for kind in (VERTEX, EDGE):
        for tname in g.schema.types(kind):
            for key in [TYPE_KEY] + list(g.schema.keys_of(kind, tname)):
                h = build_histogram(g, kind, tname, key, granularity.get(key))
                h, vmap = cluster_values(h, max_clusters)
                th = default_theta(h) if theta is None else theta
                trees[(kind, tname, key)] = build_tree(h, tile(h, th), th, vmap)
    pairs = {}
    for kind in (VERTEX, EDGE):
        for tname in g.schema.types(kind):
            keys = list(g.schema.keys_of(kind, tname))
            for i, ka in enumerate(keys):
                for kb in keys[i + 1:]:
                    tab = joint_owners(g, kind, tname, ka, kb)
                    if tab is not None:
                        pairs[(kind, tname, ka, kb)] = tab
    return GraphStats(g.content_hash(), global_stats(g), trees, pairs)
