"""Partitioned superstep execution of path queries.

A plan splits the query at one vertex position. Each side becomes a segment
traversed inward toward the split vertex: superstep 1 runs ``init`` on the
partitions whose type matches the segment's first predicate, every later
superstep runs ``compute`` on vertices that received messages at the barrier
and ``scatter`` along the next edge predicate. Matches are recorded in a
result tree (one level per superstep); messages carry only a reference to the
sender's tree node, the edge used and the message validity. The master joins
the two segments on the split vertex's slices and aggregates if asked.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from . import kernels as K
from .graph import EDGE, VERTEX, TemporalGraph
from .intervals import Cmp, Interval
from .partition import PartitionAssignment, partition
from .predicates import evaluate
from .query import Direction, EdgePredicate, PathQuery, Predicate

PHASES = ("init", "compute", "scatter", "interval", "partition", "other")

_EMPTY = np.zeros(0, dtype=np.int64)
_REVERSE = {Direction.OUT: Direction.IN, Direction.IN: Direction.OUT, Direction.BOTH: Direction.BOTH}


class QueryTimeout(RuntimeError):
    pass


# -- plan segments ---------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    position: int  # query position of the vertex evaluated at this step
    vertex: Predicate
    edge: EdgePredicate | None  # edge taken to the next step (traversal direction)
    etr: Cmp | None  # ETR between the edge into and the edge out of this vertex
    reverse: bool  # right-to-left: the edge out comes first in query order


@dataclass(frozen=True)
class Segment:
    side: str  # "left" | "right"
    steps: tuple[Step, ...]

    @property
    def hops(self) -> int:
        return len(self.steps) - 1


def segments(q: PathQuery, split: int) -> list[Segment]:
    """Segments of the plan splitting ``q`` at vertex position ``split`` (0-based)."""
    n = q.n
    if not 0 <= split < n:
        raise ValueError(f"split point {split} outside 0..{n - 1}")
    out = []
    if split > 0:
        steps = []
        for p in range(split + 1):
            edge = q.edges[p] if p < split else None
            etr = q.etr[p] if 0 < p < split else None
            steps.append(Step(p, q.vertices[p], edge, etr, False))
        out.append(Segment("left", tuple(steps)))
    if split < n - 1:
        steps = []
        for p in range(n - 1, split - 1, -1):
            edge = None
            if p > split:
                e = q.edges[p - 1]
                edge = EdgePredicate(e.predicate, _REVERSE[e.direction])
            etr = q.etr[p] if split < p < n - 1 else None
            steps.append(Step(p, q.vertices[p], edge, etr, True))
        out.append(Segment("right", tuple(steps)))
    return out


# -- result tree -------------------------------------------------------------------


@dataclass
class Level:
    """Tree nodes of one superstep plus links to their children one level down."""

    v: np.ndarray
    ts: np.ndarray
    te: np.ndarray
    in_edge: np.ndarray  # -1 unless the node is keyed by its incoming edge
    parent: np.ndarray = field(default_factory=lambda: _EMPTY)
    child: np.ndarray = field(default_factory=lambda: _EMPTY)
    edge: np.ndarray = field(default_factory=lambda: _EMPTY)
    hop_ts: np.ndarray = field(default_factory=lambda: _EMPTY)
    hop_te: np.ndarray = field(default_factory=lambda: _EMPTY)

    def __len__(self) -> int:
        return len(self.v)


@dataclass
class ResultTree:
    """Shared-prefix tree of partial paths; ``levels[0]`` holds the leaves."""

    levels: list[Level]

    def live(self) -> list[np.ndarray]:
        """Per level, the nodes reachable from a top-level node."""
        alive = [np.ones(len(self.levels[-1]), dtype=bool)]
        for j in range(len(self.levels) - 1, 0, -1):
            lv = self.levels[j]
            mask = np.zeros(len(self.levels[j - 1]), dtype=bool)
            if len(lv.parent):
                mask[lv.child[alive[0][lv.parent]]] = True
            alive.insert(0, mask)
        return alive

    def node_count(self, live_only: bool = True) -> int:
        if live_only:
            return int(sum(int(m.sum()) for m in self.live()))
        return int(sum(len(lv) for lv in self.levels))

    def expand(self, roots: np.ndarray | None = None, first_hop_level: int | None = None) -> dict[str, np.ndarray]:
        """Root-to-leaf walk. Returns per-row columns ``v{j}``, ``e{j}`` (edge between
        level j-1 and j), ``node{j}`` and, if requested, the hop validity of the
        link at ``first_hop_level``."""
        top = len(self.levels) - 1
        rows = np.arange(len(self.levels[top]), dtype=np.int64) if roots is None else np.asarray(roots, np.int64)
        cols: dict[str, np.ndarray] = {f"node{top}": rows}
        for j in range(top, 0, -1):
            lv = self.levels[j]
            order = np.argsort(lv.parent, kind="stable")
            ptr = np.zeros(len(lv) + 1, dtype=np.int64)
            np.cumsum(np.bincount(lv.parent, minlength=len(lv)), out=ptr[1:])
            rep, link = K.csr_expand(ptr, order.astype(np.int64), cols[f"node{j}"])
            cols = {k: c[rep] for k, c in cols.items()}
            cols[f"e{j}"] = lv.edge[link]
            cols[f"node{j - 1}"] = lv.child[link]
            if j == first_hop_level:
                cols["valid_ts"] = lv.hop_ts[link]
                cols["valid_te"] = lv.hop_te[link]
        for j in range(top + 1):
            cols[f"v{j}"] = self.levels[j].v[cols[f"node{j}"]]
        return cols

    def paths(self) -> list[tuple[int, ...]]:
        """Internal vertex/edge index sequences, leaf first."""
        cols = self.expand()
        top = len(self.levels) - 1
        out = []
        for r in range(len(cols[f"v{top}"])):
            seq = [int(cols["v0"][r])]
            for j in range(1, top + 1):
                seq += [int(cols[f"e{j}"][r]), int(cols[f"v{j}"][r])]
            out.append(tuple(seq))
        return out


# -- results -----------------------------------------------------------------------


@dataclass
class SuperstepStats:
    index: int
    active: int = 0  # a_i
    matched: int = 0  # m_i
    active_edges: int = 0  # ā_i
    matched_edges: int = 0  # m̄_i
    messages: int = 0
    ms: dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))

    def add(self, other: "SuperstepStats") -> None:
        self.active += other.active
        self.matched += other.matched
        self.active_edges += other.active_edges
        self.matched_edges += other.matched_edges
        self.messages += other.messages
        for k, v in other.ms.items():
            self.ms[k] += v


@dataclass
class ExecStats:
    split: int
    supersteps: list[SuperstepStats] = field(default_factory=list)
    join_ms: float = 0.0
    aggregate_ms: float = 0.0
    total_ms: float = 0.0
    tree_nodes: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "split": self.split,
            "total_ms": round(self.total_ms, 3),
            "join_ms": round(self.join_ms, 3),
            "aggregate_ms": round(self.aggregate_ms, 3),
            "tree_nodes": self.tree_nodes,
            "supersteps": [
                {"index": s.index, "a": s.active, "m": s.matched, "abar": s.active_edges,
                 "mbar": s.matched_edges, "ms": {k: round(v, 3) for k, v in s.ms.items()}}
                for s in self.supersteps
            ],
        }


@dataclass
class ResultSet:
    ids: np.ndarray  # (paths, 2n-1) external IDs in query order
    valid_ts: np.ndarray
    valid_te: np.ndarray
    aggregates: list[tuple[int, Interval, Any]] | None = None
    stats: ExecStats | None = None
    last_values: np.ndarray | None = None  # value ranks of the last vertex, for MIN/MAX

    def __len__(self) -> int:
        return len(self.valid_ts)

    @property
    def paths(self) -> list[tuple[tuple[int, ...], Interval]]:
        return [(tuple(int(x) for x in row), Interval(int(a), int(b)))
                for row, a, b in zip(self.ids, self.valid_ts, self.valid_te)]

    def canonical(self):
        if self.aggregates is not None:
            return sorted(self.aggregates, key=lambda r: (r[0], r[1], (type(r[2]).__name__, r[2])))
        return sorted(self.paths)

    def iter_json(self) -> Iterator[str]:
        if self.aggregates is not None:
            for vid, iv, val in self.canonical():
                yield json.dumps({"vid": vid, "interval": iv.to_json(), "agg": val})
            return
        for path, iv in self.canonical():
            yield json.dumps({"path": list(path), "valid": iv.to_json()})


# -- partition tasks ---------------------------------------------------------------


@dataclass
class _Out:
    """What one partition produces in one superstep (local node numbering)."""

    nodes: Level
    msg_tgt: np.ndarray
    msg_ts: np.ndarray
    msg_te: np.ndarray
    msg_child: np.ndarray
    msg_edge: np.ndarray
    stats: SuperstepStats


class _Context:
    def __init__(self, g: TemporalGraph, assignment: PartitionAssignment, q: PathQuery, deadline: float | None):
        self.g = g
        self.asg = assignment
        self.q = q
        self.deadline = deadline
        codes = g.schema.vtype_codes
        self.bound = {p: codes.get(p.bound_type, -2) if p.bound_type else None for p in q.vertices}

    def check_time(self) -> None:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise QueryTimeout("query exceeded its time budget")

    def type_ok(self, pid: int, pred: Predicate) -> bool:
        t = self.bound.get(pred)
        return t is None or int(self.asg.partition_type[pid]) == t


def _unique_rows(*cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the first occurrence of each distinct row, and the row -> group map."""
    if not len(cols[0]):
        return _EMPTY, _EMPTY
    order = np.lexsort(cols[::-1])
    sc = [c[order] for c in cols]
    new = np.ones(len(order), dtype=bool)
    diff = np.zeros(len(order) - 1, dtype=bool)
    for c in sc:
        diff |= c[1:] != c[:-1]
    new[1:] = diff
    gid_sorted = np.cumsum(new) - 1
    inverse = np.empty(len(order), dtype=np.int64)
    inverse[order] = gid_sorted
    return order[new], inverse


def _scatter(ctx: _Context, step: Step, nodes: Level, st: SuperstepStats):
    g = ctx.g
    t0 = time.perf_counter()
    d = step.edge.direction
    reps, edges, others = [], [], []
    if d in (Direction.OUT, Direction.BOTH):
        rep, e = K.csr_expand(g.out_ptr, g.out_edges, nodes.v)
        reps.append(rep), edges.append(e), others.append(g.e_dst[e])
    if d in (Direction.IN, Direction.BOTH):
        rep, e = K.csr_expand(g.in_ptr, g.in_edges, nodes.v)
        reps.append(rep), edges.append(e), others.append(g.e_src[e])
    rep, e, other = np.concatenate(reps), np.concatenate(edges), np.concatenate(others)
    # counted per tree node: a vertex holding several nodes scans its edges once per node
    st.active_edges += len(rep)
    # edges must overlap the sending slice
    keep = (g.e_ts[e] < nodes.te[rep]) & (nodes.ts[rep] < g.e_te[e])
    if step.etr is not None:
        prev = nodes.in_edge[rep]
        has = prev >= 0
        code = K.CMP_CODES[step.etr.name]
        pe = np.where(has, prev, 0)
        if step.reverse:
            ok = K.relate_arrays(g.e_ts[e], g.e_te[e], g.e_ts[pe], g.e_te[pe], code)
        else:
            ok = K.relate_arrays(g.e_ts[pe], g.e_te[pe], g.e_ts[e], g.e_te[e], code)
        keep &= np.asarray(ok, dtype=bool) | ~has
    rep, e, other = rep[keep], e[keep], other[keep]
    ue = np.unique(e)
    es = evaluate(g, EDGE, step.edge.predicate, ue)
    qi, sj = K.overlap_pairs(e, nodes.ts[rep], nodes.te[rep], *es)
    rep, e, other = rep[qi], e[qi], other[qi]
    mts = np.maximum(nodes.ts[rep], es[1][sj])
    mte = np.minimum(nodes.te[rep], es[2][sj])
    st.matched_edges += len(rep)
    st.messages += len(rep)
    st.ms["scatter"] += (time.perf_counter() - t0) * 1e3
    return other, mts, mte, rep, e


def _run_step(ctx: _Context, seg: Segment, k: int, pid: int, msgs, first_hop: bool) -> _Out:
    """Init (k == 0) or compute, then scatter, for one partition."""
    g = ctx.g
    step = seg.steps[k]
    st = SuperstepStats(k + 1)
    t0 = time.perf_counter()
    if k == 0:
        cand = ctx.asg.members(pid)
        st.active += len(cand)
        sl = evaluate(g, VERTEX, step.vertex, cand)
        nodes = Level(sl[0], sl[1], sl[2], np.full(len(sl[0]), -1, dtype=np.int64))
        st.ms["init"] += (time.perf_counter() - t0) * 1e3
    else:
        tgt, mts, mte, mchild, medge = msgs
        active = np.unique(tgt)
        st.active += len(active)
        # slicing the active vertices by property history is the interval phase
        sl = evaluate(g, VERTEX, step.vertex, active)
        t2 = time.perf_counter()
        st.ms["interval"] += (t2 - t0) * 1e3
        mi, sj = K.overlap_pairs(tgt, mts, mte, *sl)
        hts = np.maximum(mts[mi], sl[1][sj])
        hte = np.minimum(mte[mi], sl[2][sj])
        keyed = step.etr is not None and step.edge is not None
        in_edge = medge[mi] if keyed else np.full(len(mi), -1, dtype=np.int64)
        first, node_of = _unique_rows(sj, in_edge)
        nodes = Level(sl[0][sj[first]], sl[1][sj[first]], sl[2][sj[first]], in_edge[first])
        child, edge = mchild[mi], medge[mi]
        if first_hop:
            keep, _ = _unique_rows(node_of, child, edge, hts, hte)
        else:
            keep, _ = _unique_rows(node_of, child, edge)
        nodes.parent, nodes.child, nodes.edge = node_of[keep], child[keep], edge[keep]
        nodes.hop_ts, nodes.hop_te = hts[keep], hte[keep]
        st.ms["compute"] += (time.perf_counter() - t2) * 1e3
    st.matched += len(np.unique(nodes.v))
    if step.edge is not None and len(nodes):
        out = _scatter(ctx, step, nodes, st)
    else:
        out = (_EMPTY,) * 5
    return _Out(nodes, *out, stats=st)


# -- the superstep loop ------------------------------------------------------------


def _route(ctx: _Context, step: Step, tgt, ts, te, child, edge, st: SuperstepStats):
    """Group messages by destination partition, dropping partitions of the wrong type."""
    t0 = time.perf_counter()
    part = ctx.asg.partition_of[tgt]
    order = np.argsort(part, kind="stable")
    part = part[order]
    tgt, ts, te, child, edge = tgt[order], ts[order], te[order], child[order], edge[order]
    bounds = np.flatnonzero(np.diff(part)) + 1
    starts = np.concatenate(([0], bounds)) if len(part) else _EMPTY
    ends = np.concatenate((bounds, [len(part)])) if len(part) else _EMPTY
    boxes = {}
    for a, b in zip(starts, ends):
        pid = int(part[a])
        if ctx.type_ok(pid, step.vertex):
            boxes[pid] = (tgt[a:b], ts[a:b], te[a:b], child[a:b], edge[a:b])
    st.ms["partition"] += (time.perf_counter() - t0) * 1e3
    return boxes


def _concat_level(outs: list[_Out]) -> tuple[Level, list[int]]:
    offsets, total = [], 0
    for o in outs:
        offsets.append(total)
        total += len(o.nodes)
    if not outs:
        return Level(_EMPTY, _EMPTY, _EMPTY, _EMPTY), offsets
    cat = lambda name: np.concatenate([getattr(o.nodes, name) for o in outs])  # noqa: E731
    lv = Level(cat("v"), cat("ts"), cat("te"), cat("in_edge"))
    lv.parent = np.concatenate([o.nodes.parent + off for o, off in zip(outs, offsets)])
    lv.child, lv.edge = cat("child"), cat("edge")
    lv.hop_ts, lv.hop_te = cat("hop_ts"), cat("hop_te")
    return lv, offsets


class Engine:
    """Executes queries on one graph with a fixed partitioning and worker pool."""

    def __init__(self, g: TemporalGraph, assignment: PartitionAssignment | None = None,
                 workers: int | None = None) -> None:
        self.g = g
        self.asg = assignment if assignment is not None else partition(g, workers or 1, 1)
        self.workers = workers or self.asg.workers
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _run_tasks(self, ctx: _Context, tasks: list[tuple]) -> list[_Out]:
        """Run (segment, step, pid, msgs, first_hop) tasks, one worker per partition owner."""
        by_worker: dict[int, list] = {}
        for i, t in enumerate(tasks):
            by_worker.setdefault(int(self.asg.worker_of[t[2]]) % self.workers, []).append((i, t))

        def work(items):
            res = []
            for i, (seg, k, pid, msgs, fh) in items:
                ctx.check_time()
                res.append((i, _run_step(ctx, seg, k, pid, msgs, fh)))
            return res

        results: list[_Out | None] = [None] * len(tasks)
        if self._pool is None:
            for items in by_worker.values():
                for i, o in work(items):
                    results[i] = o
        else:
            for fut in [self._pool.submit(work, items) for items in by_worker.values()]:
                for i, o in fut.result():
                    results[i] = o
        return results  # type: ignore[return-value]

    def execute(self, q: PathQuery, split: int | None = None, timeout_ms: float | None = None) -> ResultSet:
        """Run ``q`` split at vertex position ``split`` (default: left-to-right)."""
        t_start = time.perf_counter()
        deadline = None if timeout_ms is None else t_start + timeout_ms / 1e3
        split = q.n - 1 if split is None else split
        ctx = _Context(self.g, self.asg, q, deadline)
        segs = segments(q, split)
        stats = ExecStats(split)
        trees = {s.side: ResultTree([]) for s in segs}
        pending: dict[str, dict[int, tuple]] = {}
        nsteps = max(len(s.steps) for s in segs)
        for k in range(nsteps):
            ss = SuperstepStats(k + 1)
            tasks, owners = [], []
            for seg in segs:
                if k >= len(seg.steps):
                    continue
                fh = (seg.side == "left" and k == 1) or (seg.side == "right" and split == 0 and k == seg.hops)
                if k == 0:
                    t0 = time.perf_counter()
                    pids = [p for p in range(self.asg.num_partitions) if ctx.type_ok(p, seg.steps[0].vertex)]
                    ss.ms["partition"] += (time.perf_counter() - t0) * 1e3
                    for pid in pids:
                        tasks.append((seg, 0, pid, None, False))
                        owners.append(seg.side)
                else:
                    for pid, box in sorted(pending.get(seg.side, {}).items()):
                        tasks.append((seg, k, pid, box, fh))
                        owners.append(seg.side)
            outs = self._run_tasks(ctx, tasks)
            ctx.check_time()
            for seg in segs:
                if k >= len(seg.steps):
                    continue
                mine = [o for o, side in zip(outs, owners) if side == seg.side]
                for o in mine:
                    ss.add(o.stats)
                level, offsets = _concat_level(mine)
                trees[seg.side].levels.append(level)
                if k + 1 < len(seg.steps) and mine:
                    cat = lambda name: np.concatenate([getattr(o, name) for o in mine])  # noqa: E731
                    child = np.concatenate([o.msg_child + off for o, off in zip(mine, offsets)])
                    pending[seg.side] = _route(ctx, seg.steps[k + 1], cat("msg_tgt"), cat("msg_ts"),
                                               cat("msg_te"), child, cat("msg_edge"), ss)
                else:
                    pending[seg.side] = {}
            ss.index = k + 1
            stats.supersteps.append(ss)

        t0 = time.perf_counter()
        rs = self._assemble(ctx, q, split, segs, trees)
        stats.join_ms = (time.perf_counter() - t0) * 1e3
        stats.tree_nodes = sum(t.node_count() for t in trees.values())
        if q.aggregate is not None:
            t0 = time.perf_counter()
            rs.aggregates = aggregate_rows(self.g, q, rs)
            stats.aggregate_ms = (time.perf_counter() - t0) * 1e3
        stats.total_ms = (time.perf_counter() - t_start) * 1e3
        rs.stats = stats
        self.last_trees = trees
        return rs

    # -- master side ---------------------------------------------------------------

    def _assemble(self, ctx: _Context, q: PathQuery, split: int, segs, trees) -> ResultSet:
        g = self.g
        n = q.n
        vcols: list[np.ndarray | None] = [None] * n
        ecols: list[np.ndarray | None] = [None] * (n - 1)
        if len(segs) == 1:
            seg = segs[0]
            tree = trees[seg.side]
            fh = 1 if seg.side == "left" else seg.hops
            cols = tree.expand(first_hop_level=fh)
            for j, st in enumerate(seg.steps):
                vcols[st.position] = cols[f"v{j}"]
                if j:
                    ecols[min(st.position, seg.steps[j - 1].position)] = cols[f"e{j}"]
            vts, vte = cols["valid_ts"], cols["valid_te"]
            last_node = cols[f"node{seg.hops}"] if seg.side == "left" else cols["node0"]
            last_level = tree.levels[-1] if seg.side == "left" else tree.levels[0]
        else:
            left, right = segs
            lt, rt = trees["left"], trees["right"]
            lc = lt.expand(first_hop_level=1)
            rc = rt.expand()
            ltop, rtop = left.hops, right.hops
            # join on the split vertex slice
            lkey_v, lkey_t = lc[f"v{ltop}"], lt.levels[-1].ts[lc[f"node{ltop}"]]
            rkey_v, rkey_t = rc[f"v{rtop}"], rt.levels[-1].ts[rc[f"node{rtop}"]]
            li, ri = _equi_join(lkey_v, lkey_t, rkey_v, rkey_t)
            etr = q.etr[split]
            if etr is not None and len(li):
                el = lc[f"e{ltop}"][li]
                er = rc[f"e{rtop}"][ri]
                ok = np.asarray(K.relate_arrays(g.e_ts[el], g.e_te[el], g.e_ts[er], g.e_te[er],
                                                K.CMP_CODES[etr.name]), dtype=bool)
                li, ri = li[ok], ri[ok]
            for j, st in enumerate(left.steps):
                vcols[st.position] = lc[f"v{j}"][li]
                if j:
                    ecols[st.position - 1] = lc[f"e{j}"][li]
            for j, st in enumerate(right.steps):
                vcols[st.position] = rc[f"v{j}"][ri]
                if j:
                    ecols[st.position] = rc[f"e{j}"][ri]
            vts, vte = lc["valid_ts"][li], lc["valid_te"][li]
            last_node = rc["node0"][ri]
            last_level = rt.levels[0]
        ctx.check_time()
        mat = np.empty((len(vts), 2 * n - 1), dtype=np.int64)
        for i in range(n):
            mat[:, 2 * i] = vcols[i]
        for i in range(n - 1):
            mat[:, 2 * i + 1] = ecols[i]
        values = None
        if q.aggregate is not None and q.aggregate.op != "count":
            values = _node_values(g, q.aggregate.key, q.aggregate.op, last_level)[last_node]
            ok = values >= 0
            mat, vts, vte, values = mat[ok], vts[ok], vte[ok], values[ok]
        keys = [mat[:, c] for c in range(mat.shape[1])] + [vts, vte]
        first, inverse = _unique_rows(*keys)
        if values is not None and len(first):
            red = np.full(len(first), -1, dtype=np.int64)
            if q.aggregate.op == "min":
                red[:] = np.iinfo(np.int64).max
                np.minimum.at(red, inverse, values)
            else:
                np.maximum.at(red, inverse, values)
            values = red
        mat, vts, vte = mat[first], vts[first], vte[first]
        ids = np.empty_like(mat)
        ids[:, 0::2] = g.v_id[mat[:, 0::2]]
        ids[:, 1::2] = g.e_id[mat[:, 1::2]]
        return ResultSet(ids, vts, vte, last_values=values)


def _equi_join(av, at, bv, bt):
    """All (i, j) with av[i] == bv[j] and at[i] == bt[j]."""
    if not len(av) or not len(bv):
        return _EMPTY, _EMPTY
    _, gid = _unique_rows(np.concatenate((av, bv)), np.concatenate((at, bt)))
    ga, gb = gid[: len(av)], gid[len(av):]
    order_b = np.argsort(gb, kind="stable")
    ngroups = int(gid.max()) + 1
    ptr = np.zeros(ngroups + 1, dtype=np.int64)
    np.cumsum(np.bincount(gb, minlength=ngroups), out=ptr[1:])
    return K.csr_expand(ptr, order_b.astype(np.int64), ga)


def _value_ranks(g: TemporalGraph) -> np.ndarray:
    ranks = getattr(g, "_value_rank", None)
    if ranks is None or len(ranks) != len(g.pool):
        vals = g.pool.values
        order = sorted(range(len(vals)), key=lambda i: (0, vals[i], "") if isinstance(vals[i], int)
                       else (1, 0, vals[i]))
        ranks = np.empty(len(vals), dtype=np.int64)
        ranks[order] = np.arange(len(vals))
        g._value_rank = ranks
        g._rank_value = [vals[i] for i in order]
    return ranks


def _node_values(g: TemporalGraph, key: str, op: str, level: Level) -> np.ndarray:
    """Per node: min/max rank of the key's values over the node's slice, -1 if none."""
    ranks = _value_ranks(g)
    out = np.full(len(level), -1, dtype=np.int64)
    col = g.vprops.get(g.schema.key_codes.get(key, -1))
    if col is None or not len(level):
        return out
    rep, rec = K.csr_expand(col.ptr, np.arange(len(col.owner), dtype=np.int64), level.v)
    ok = (col.ts[rec] < level.te[rep]) & (level.ts[rep] < col.te[rec])
    rep, r = rep[ok], ranks[col.value[rec[ok]]]
    if op == "min":
        tmp = np.full(len(level), np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(tmp, rep, r)
        hit = tmp != np.iinfo(np.int64).max
    else:
        tmp = np.full(len(level), -1, dtype=np.int64)
        np.maximum.at(tmp, rep, r)
        hit = tmp >= 0
    out[hit] = tmp[hit]
    return out


def aggregate_rows(g: TemporalGraph, q: PathQuery, rs: ResultSet) -> list[tuple[int, Interval, Any]]:
    """Group paths by first vertex and time, then count / min / max per maximal run."""
    agg = q.aggregate
    vid = rs.ids[:, 0] if len(rs) else _EMPTY
    out: list[tuple[int, Interval, Any]] = []
    if not len(vid):
        return out
    if agg.op == "count":
        ent = np.concatenate((vid, vid))
        t = np.concatenate((rs.valid_ts, rs.valid_te))
        d = np.concatenate((np.ones(len(vid), np.int64), -np.ones(len(vid), np.int64)))
        order = np.lexsort((t, ent))
        ent, t, d = ent[order], t[order], d[order]
        new = np.ones(len(ent), dtype=bool)
        new[1:] = (ent[1:] != ent[:-1]) | (t[1:] != t[:-1])
        starts = np.flatnonzero(new)
        ent, t = ent[starts], t[starts]
        level = np.cumsum(np.add.reduceat(d, starts))
        prev = None
        for i in range(len(ent) - 1):
            if ent[i + 1] != ent[i] or level[i] <= 0:
                prev = None
                continue
            row = (int(ent[i]), Interval(int(t[i]), int(t[i + 1])), int(level[i]))
            if prev is not None and out[-1][0] == row[0] and out[-1][1].te == row[1].ts and out[-1][2] == row[2]:
                out[-1] = (row[0], Interval(out[-1][1].ts, row[1].te), row[2])
            else:
                out.append(row)
            prev = row
        return out
    _value_ranks(g)
    values = rs.last_values
    pick = np.minimum if agg.op == "min" else np.maximum
    order = np.argsort(vid, kind="stable")
    bounds = np.flatnonzero(np.diff(vid[order])) + 1
    for grp in np.split(order, bounds):
        cuts = np.unique(np.concatenate((rs.valid_ts[grp], rs.valid_te[grp])))
        seg = np.full(len(cuts) - 1, -1, dtype=np.int64)
        a = np.searchsorted(cuts, rs.valid_ts[grp])
        b = np.searchsorted(cuts, rs.valid_te[grp])
        for lo, hi, v in zip(a, b, values[grp]):
            cur = seg[lo:hi]
            seg[lo:hi] = np.where(cur < 0, v, pick(cur, v))
        v0 = int(vid[grp[0]])
        for i in range(len(seg)):
            if seg[i] < 0:
                continue
            val = g._rank_value[int(seg[i])]
            if out and out[-1][0] == v0 and out[-1][1].te == int(cuts[i]) and out[-1][2] == val:
                out[-1] = (v0, Interval(out[-1][1].ts, int(cuts[i + 1])), val)
            else:
                out.append((v0, Interval(int(cuts[i]), int(cuts[i + 1])), val))
    return out


def execute(g: TemporalGraph, q: PathQuery, split: int | None = None, assignment: PartitionAssignment | None = None,
            workers: int = 1, timeout_ms: float | None = None) -> ResultSet:
    """One-shot convenience wrapper around :class:`Engine`."""
    with Engine(g, assignment, workers) as eng:
        return eng.execute(q, split, timeout_ms)

