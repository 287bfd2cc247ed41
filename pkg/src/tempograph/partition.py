"""Two-level vertex partitioning: by type, then by a greedy edge-cut within type.

The second level walks vertices heaviest-first (total lifespan-duration
weight of intra-type edges) and places each on the partition holding most of
its already-placed neighbour weight, damped by partition fill. Vertices with
no intra-type edges top up the emptiest partitions, and a final repair pass
keeps sizes within 10% of each other. Partitions are dealt to workers
round-robin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Protocol

import numpy as np

from .graph import VERTEX, TemporalGraph
from .intervals import INFINITY

BALANCE = 0.10


@dataclass
class PartitionAssignment:
    partition_of: np.ndarray  # internal vertex index -> partition id
    partition_type: np.ndarray  # partition id -> vertex type code
    worker_of: np.ndarray  # partition id -> worker id
    workers: int
    per_type: int
    seed: int = 0

    def __post_init__(self) -> None:
        order = np.argsort(self.partition_of, kind="stable")
        counts = np.bincount(self.partition_of, minlength=self.num_partitions)
        self._ptr = np.zeros(self.num_partitions + 1, dtype=np.int64)
        np.cumsum(counts, out=self._ptr[1:])
        self._members = order.astype(np.int64)

    @property
    def num_partitions(self) -> int:
        return len(self.partition_type)

    def members(self, pid: int) -> np.ndarray:
        """Sorted internal indices of the vertices in partition ``pid``."""
        return self._members[self._ptr[pid]:self._ptr[pid + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self._ptr)

    def partitions_of_worker(self, w: int) -> list[int]:
        return [int(p) for p in np.flatnonzero(self.worker_of == w)]

    def to_json(self, g: TemporalGraph) -> dict:
        return {
            "workers": self.workers,
            "per_type": self.per_type,
            "seed": self.seed,
            "graph": g.content_hash(),
            "partition_type": [g.type_name(VERTEX, int(t)) for t in self.partition_type],
            "worker_of": self.worker_of.tolist(),
            "vertices": g.v_id.tolist(),
            "partition_of": self.partition_of.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, g: TemporalGraph) -> "PartitionAssignment":
        if obj.get("graph") != g.content_hash():
            raise ValueError("partition file was built for a different graph")
        codes = g.schema.vtype_codes
        part = np.empty(g.num_vertices, dtype=np.int64)
        part[np.searchsorted(g.v_id, np.asarray(obj["vertices"], dtype=np.int64))] = obj["partition_of"]
        return cls(
            partition_of=part,
            partition_type=np.array([codes[t] for t in obj["partition_type"]], dtype=np.int64),
            worker_of=np.asarray(obj["worker_of"], dtype=np.int64),
            workers=int(obj["workers"]),
            per_type=int(obj["per_type"]),
            seed=int(obj["seed"]),
        )

    def dump(self, g: TemporalGraph, out: IO[str]) -> None:
        json.dump(self.to_json(g), out)


class Partitioner(Protocol):
    def __call__(self, g: TemporalGraph, workers: int, per_type: int, seed: int = 0) -> PartitionAssignment: ...


def _edge_weights(g: TemporalGraph) -> np.ndarray:
    te = g.e_te.copy()
    finite = g.v_te[g.v_te < INFINITY]
    horizon = int(max(finite.max() if len(finite) else 0, g.e_ts.max() + 1 if g.num_edges else 1))
    te[te >= INFINITY] = horizon
    return np.maximum(te - g.e_ts, 1).astype(np.float64)


def _greedy_split(n: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray, p: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Assign ``n`` local vertices to ``p`` parts; edges given as local (src, dst, weight)."""
    assign = np.full(n, -1, dtype=np.int64)
    if p == 1 or n == 0:
        assign[:] = 0
        return assign
    sizes = np.zeros(p, dtype=np.int64)
    cap = int(np.ceil(n / p * (1 + BALANCE / 2)))
    # symmetric adjacency
    a = np.concatenate((src, dst))
    b = np.concatenate((dst, src))
    ww = np.concatenate((w, w))
    order = np.argsort(a, kind="stable")
    a, b, ww = a[order], b[order], ww[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=n), out=ptr[1:])
    strength = np.bincount(a, weights=ww, minlength=n)
    tiebreak = rng.permutation(n)
    connected = np.flatnonzero(strength > 0)
    walk = connected[np.lexsort((tiebreak[connected], -strength[connected]))]
    for v in walk:
        lo, hi = ptr[v], ptr[v + 1]
        nb = assign[b[lo:hi]]
        placed = nb >= 0
        score = np.bincount(nb[placed], weights=ww[lo:hi][placed], minlength=p).astype(np.float64)
        score *= 1.0 - sizes / cap
        score[sizes >= cap] = -1.0
        best = np.flatnonzero(score == score.max())
        if score.max() <= 0:
            best = np.flatnonzero((sizes == sizes.min()))
        k = int(best[np.argmin(sizes[best])])
        assign[v] = k
        sizes[k] += 1
    # isolated vertices fill the emptiest parts, in seeded order
    rest = np.flatnonzero(assign < 0)
    rest = rest[np.argsort(tiebreak[rest], kind="stable")]
    target = np.full(p, n // p, dtype=np.int64)
    target[: n % p] += 1
    pos = 0
    for k in np.argsort(sizes, kind="stable"):
        take = int(max(target[k] - sizes[k], 0))
        take = min(take, len(rest) - pos)
        assign[rest[pos:pos + take]] = k
        sizes[k] += take
        pos += take
    for v in rest[pos:]:
        k = int(np.argmin(sizes))
        assign[v] = k
        sizes[k] += 1
    # repair: move the weakest-attached vertices from the largest to the smallest part
    slack = max(1, int(BALANCE * n / p))
    while sizes.max() - sizes.min() > slack:
        big, small = int(np.argmax(sizes)), int(np.argmin(sizes))
        members = np.flatnonzero(assign == big)
        internal = np.array([ww[ptr[v]:ptr[v + 1]][assign[b[ptr[v]:ptr[v + 1]]] == big].sum()
                             for v in members])
        move = int((sizes[big] - sizes[small]) // 2)
        victims = members[np.argsort(internal, kind="stable")[:move]]
        assign[victims] = small
        sizes[big] -= len(victims)
        sizes[small] += len(victims)
    return assign


def partition(g: TemporalGraph, workers: int = 1, per_type: int = 1, seed: int = 0) -> PartitionAssignment:
    """Type-pure partitions, ``per_type`` per vertex type, dealt round-robin to ``workers``."""
    if workers < 1 or per_type < 1:
        raise ValueError("workers and per_type must be at least 1")
    rng = np.random.default_rng(seed)
    ntypes = len(g.schema.vertex_types)
    part = np.zeros(g.num_vertices, dtype=np.int64)
    weights = _edge_weights(g) if g.num_edges else np.zeros(0)
    for t in range(ntypes):
        verts = np.flatnonzero(g.v_type == t)
        local = np.full(g.num_vertices, -1, dtype=np.int64)
        local[verts] = np.arange(len(verts))
        if g.num_edges:
            intra = (local[g.e_src] >= 0) & (local[g.e_dst] >= 0) & (g.e_src != g.e_dst)
            src, dst, w = local[g.e_src[intra]], local[g.e_dst[intra]], weights[intra]
        else:
            src = dst = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        sub = _greedy_split(len(verts), src, dst, w, per_type, rng)
        part[verts] = t * per_type + sub
    ptype = np.repeat(np.arange(ntypes, dtype=np.int64), per_type)
    worker_of = np.arange(len(ptype), dtype=np.int64) % workers
    return PartitionAssignment(part, ptype, worker_of, workers, per_type, seed)


def edge_cut(g: TemporalGraph, part_of: np.ndarray, intra_type_only: bool = True) -> float:
    """Total weight of edges whose endpoints sit in different partitions."""
    if not g.num_edges:
        return 0.0
    mask = part_of[g.e_src] != part_of[g.e_dst]
    if intra_type_only:
        mask &= g.v_type[g.e_src] == g.v_type[g.e_dst]
    return float(_edge_weights(g)[mask].sum())
