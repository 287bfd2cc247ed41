"""Columnar in-memory temporal property graph.

Vertices, edges and property records are stored as parallel numpy columns.
Entities are addressed internally by a dense index (position after sorting by
external ID); adjacency is kept as CSR arrays in both directions.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator

import numpy as np

from .intervals import INFINITY, Interval

VERTEX = "vertex"
EDGE = "edge"
TYPE_KEY = "Type"


class GraphError(ValueError):
    """A record violates a graph integrity constraint."""


@dataclass
class GraphSchema:
    vertex_keys: dict[str, list[str]] = field(default_factory=dict)
    edge_keys: dict[str, list[str]] = field(default_factory=dict)
    multi_valued: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        keys = sorted({k for ks in self.vertex_keys.values() for k in ks}
                      | {k for ks in self.edge_keys.values() for k in ks})
        if TYPE_KEY in keys:
            raise GraphError(f"'{TYPE_KEY}' is reserved and cannot be a property key")
        self.key_codes: dict[str, int] = {k: i for i, k in enumerate(keys)}
        self.key_names: list[str] = keys
        self.vertex_types: list[str] = sorted(self.vertex_keys)
        self.edge_types: list[str] = sorted(self.edge_keys)
        self.vtype_codes = {t: i for i, t in enumerate(self.vertex_types)}
        self.etype_codes = {t: i for i, t in enumerate(self.edge_types)}

    def types(self, kind: str) -> list[str]:
        return self.vertex_types if kind == VERTEX else self.edge_types

    def type_codes(self, kind: str) -> dict[str, int]:
        return self.vtype_codes if kind == VERTEX else self.etype_codes

    def keys_of(self, kind: str, type_name: str) -> list[str]:
        table = self.vertex_keys if kind == VERTEX else self.edge_keys
        return table[type_name]

    def types_with_key(self, kind: str, key: str) -> list[str]:
        table = self.vertex_keys if kind == VERTEX else self.edge_keys
        return [t for t in sorted(table) if key in table[t]]

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "schema",
            "vertex_types": self.vertex_keys,
            "edge_types": self.edge_keys,
            "multi_valued": sorted(self.multi_valued),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "GraphSchema":
        return cls(
            vertex_keys={t: list(ks) for t, ks in obj.get("vertex_types", {}).items()},
            edge_keys={t: list(ks) for t, ks in obj.get("edge_types", {}).items()},
            multi_valued=frozenset(obj.get("multi_valued", ())),
        )


class ValuePool:
    """Interns property values; equal values share one integer code."""

    def __init__(self) -> None:
        self.values: list[Any] = []
        self._codes: dict[tuple[type, Any], int] = {}

    def intern(self, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            raise GraphError(f"property values must be strings or integers, got {value!r}")
        k = (type(value), value)
        code = self._codes.get(k)
        if code is None:
            code = len(self.values)
            self._codes[k] = code
            self.values.append(value)
        return code

    def code(self, value: Any) -> int:
        """Code of an already-interned value, or -1 if the value never occurs."""
        return self._codes.get((type(value), value), -1)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class PropColumn:
    """All records of one key for one entity kind, sorted by (owner, ts)."""

    owner: np.ndarray
    value: np.ndarray
    ts: np.ndarray
    te: np.ndarray
    ptr: np.ndarray  # CSR offsets over owner index

    def records_of(self, idx: int) -> slice:
        return slice(int(self.ptr[idx]), int(self.ptr[idx + 1]))


def _i64(values: Iterable[int] | np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=np.int64))


def _csr(keys: np.ndarray, n: int, order_by: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return (ptr, perm) such that perm[ptr[i]:ptr[i+1]] lists items with key i."""
    if order_by is None:
        perm = np.argsort(keys, kind="stable")
    else:
        perm = np.lexsort((order_by, keys))
    counts = np.bincount(keys, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, perm.astype(np.int64)


class TemporalGraph:
    """Immutable temporal property graph; build via ``from_arrays`` or ``load_graph``."""

    def __init__(self) -> None:  # use the constructors below
        self.schema: GraphSchema
        self.pool: ValuePool

    @classmethod
    def from_arrays(
        cls,
        schema: GraphSchema,
        pool: ValuePool,
        vertices: dict[str, np.ndarray],
        edges: dict[str, np.ndarray],
        vprops: dict[str, dict[str, np.ndarray]] | None = None,
        eprops: dict[str, dict[str, np.ndarray]] | None = None,
    ) -> "TemporalGraph":
        """Validate and index column data.

        ``vertices`` holds ``vid, type, ts, te``; ``edges`` holds ``eid, type,
        src, dst, ts, te`` with src/dst as external vertex IDs. Property dicts
        map key name to columns ``owner`` (external ID), ``value`` (pool code),
        ``ts``, ``te``.
        """
        g = cls()
        g.schema = schema
        g.pool = pool

        vid = _i64(vertices["vid"])
        order = np.argsort(vid, kind="stable")
        g.v_id = vid[order]
        g.v_type = _i64(vertices["type"])[order]
        g.v_ts = _i64(vertices["ts"])[order]
        g.v_te = _i64(vertices["te"])[order]
        _check_unique(g.v_id, "vertex")
        _check_lifespans(g.v_id, g.v_ts, g.v_te, "vertex")

        eid = _i64(edges["eid"])
        order = np.argsort(eid, kind="stable")
        g.e_id = eid[order]
        g.e_type = _i64(edges["type"])[order]
        src_ext = _i64(edges["src"])[order]
        dst_ext = _i64(edges["dst"])[order]
        g.e_ts = _i64(edges["ts"])[order]
        g.e_te = _i64(edges["te"])[order]
        _check_unique(g.e_id, "edge")
        _check_lifespans(g.e_id, g.e_ts, g.e_te, "edge")
        g.e_src = g._vertex_index(src_ext, g.e_id, "source")
        g.e_dst = g._vertex_index(dst_ext, g.e_id, "sink")
        bad = (g.e_ts < g.v_ts[g.e_src]) | (g.e_te > g.v_te[g.e_src]) | (
            g.e_ts < g.v_ts[g.e_dst]) | (g.e_te > g.v_te[g.e_dst])
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise GraphError(
                f"referential integrity: edge {g.e_id[i]} lifespan "
                f"{Interval(int(g.e_ts[i]), int(g.e_te[i]))} is not contained in both endpoint lifespans"
            )

        nv, ne = len(g.v_id), len(g.e_id)
        g.out_ptr, g.out_edges = _csr(g.e_src, nv)
        g.in_ptr, g.in_edges = _csr(g.e_dst, nv)
        g.out_deg = np.diff(g.out_ptr)
        g.in_deg = np.diff(g.in_ptr)

        g.vprops = g._build_props(VERTEX, vprops or {}, g.v_id, g.v_type, g.v_ts, g.v_te, nv)
        g.eprops = g._build_props(EDGE, eprops or {}, g.e_id, g.e_type, g.e_ts, g.e_te, ne)
        return g

    # -- construction helpers -------------------------------------------------

    def _vertex_index(self, ext: np.ndarray, eids: np.ndarray, role: str) -> np.ndarray:
        idx = np.searchsorted(self.v_id, ext)
        idx_c = np.minimum(idx, max(len(self.v_id) - 1, 0))
        ok = (idx < len(self.v_id)) & (self.v_id[idx_c] == ext) if len(self.v_id) else np.zeros(len(ext), bool)
        if not ok.all():
            i = int(np.flatnonzero(~ok)[0])
            raise GraphError(f"edge {eids[i]} references missing {role} vertex {ext[i]}")
        return idx_c.astype(np.int64)

    def _build_props(self, kind, props, ids, types, ts, te, n) -> dict[int, PropColumn]:
        out: dict[int, PropColumn] = {}
        label = "vertex" if kind == VERTEX else "edge"
        type_names = self.schema.types(kind)
        for key, cols in props.items():
            if key not in self.schema.key_codes:
                raise GraphError(f"unknown property key {key!r}")
            owner_ext = _i64(cols["owner"])
            idx = np.searchsorted(ids, owner_ext)
            idx_c = np.minimum(idx, max(n - 1, 0))
            ok = (idx < n) & (ids[idx_c] == owner_ext) if n else np.zeros(len(owner_ext), bool)
            if not ok.all():
                i = int(np.flatnonzero(~ok)[0])
                raise GraphError(f"property {key!r} references missing {label} {owner_ext[i]}")
            allowed = np.array([key in self.schema.keys_of(kind, t) for t in type_names], dtype=bool)
            own_ok = allowed[types[idx_c]] if len(idx_c) else np.zeros(0, bool)
            if not own_ok.all():
                i = int(np.flatnonzero(~own_ok)[0])
                raise GraphError(
                    f"key {key!r} is not in the schema of {label} {owner_ext[i]} "
                    f"(type {type_names[types[idx_c[i]]]})"
                )
            pts, pte = _i64(cols["ts"]), _i64(cols["te"])
            _check_lifespans(owner_ext, pts, pte, f"{key!r} property of {label}")
            bad = (pts < ts[idx_c]) | (pte > te[idx_c])
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise GraphError(
                    f"property {key!r} of {label} {owner_ext[i]} has lifespan "
                    f"{Interval(int(pts[i]), int(pte[i]))} outside the owner lifespan"
                )
            ptr, perm = _csr(idx_c, n, order_by=pts)
            col = PropColumn(
                owner=idx_c[perm], value=_i64(cols["value"])[perm], ts=pts[perm], te=pte[perm], ptr=ptr
            )
            if key not in self.schema.multi_valued and len(col.owner) > 1:
                same = col.owner[1:] == col.owner[:-1]
                clash = same & (col.ts[1:] < col.te[:-1])
                if clash.any():
                    i = int(np.flatnonzero(clash)[0]) + 1
                    raise GraphError(
                        f"single-valued key {key!r} of {label} {ids[col.owner[i]]} has overlapping records"
                    )
            out[self.schema.key_codes[key]] = col
        return out

    # -- accessors ------------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.v_id)

    @property
    def num_edges(self) -> int:
        return len(self.e_id)

    def vertex_index(self, vid: int) -> int:
        i = int(np.searchsorted(self.v_id, vid))
        if i >= len(self.v_id) or self.v_id[i] != vid:
            raise KeyError(f"no vertex {vid}")
        return i

    def edge_index(self, eid: int) -> int:
        i = int(np.searchsorted(self.e_id, eid))
        if i >= len(self.e_id) or self.e_id[i] != eid:
            raise KeyError(f"no edge {eid}")
        return i

    def props(self, kind: str) -> dict[int, PropColumn]:
        return self.vprops if kind == VERTEX else self.eprops

    def type_name(self, kind: str, code: int) -> str:
        return self.schema.types(kind)[code]

    def lifespan(self) -> Interval:
        """Smallest interval covering every vertex (and thus every edge and property)."""
        if not self.num_vertices:
            return Interval(0, 1)
        return Interval(int(self.v_ts.min()), int(self.v_te.max()))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.v_id, self.v_type, self.v_ts, self.v_te,
                    self.e_id, self.e_type, self.e_src, self.e_dst, self.e_ts, self.e_te):
            h.update(arr.tobytes())
        for kind in (VERTEX, EDGE):
            for code in sorted(self.props(kind)):
                col = self.props(kind)[code]
                # pool codes and tie order depend on ingest order, so hash sorted value ranks
                codes, inv = np.unique(col.value, return_inverse=True)
                reprs = [repr(self.pool.values[c]) for c in codes]
                order = sorted(range(len(reprs)), key=reprs.__getitem__)
                rank = np.empty(len(codes), dtype=np.int64)
                rank[order] = np.arange(len(codes))
                vr = rank[inv.ravel()]
                perm = np.lexsort((vr, col.te, col.ts, col.owner))
                h.update(f"{kind}:{self.schema.key_names[code]}".encode())
                h.update("\x1f".join(reprs[i] for i in order).encode())
                for arr in (col.owner, col.ts, col.te, vr):
                    h.update(np.ascontiguousarray(arr[perm]).tobytes())
        return h.hexdigest()[:16]


def _check_unique(ids: np.ndarray, label: str) -> None:
    if len(ids) > 1:
        dup = ids[1:] == ids[:-1]
        if dup.any():
            raise GraphError(f"duplicate {label} id {ids[1:][dup][0]}")


def _check_lifespans(ids: np.ndarray, ts: np.ndarray, te: np.ndarray, label: str) -> None:
    bad = (ts < 0) | (ts >= te)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise GraphError(f"{label} {ids[i]} has an empty or negative lifespan [{ts[i]}, {te[i]})")


# -- queries over a loaded graph ----------------------------------------------


def is_static(g: TemporalGraph) -> bool:
    """True iff every property record spans its owner's whole lifespan."""
    for kind, ts, te in ((VERTEX, g.v_ts, g.v_te), (EDGE, g.e_ts, g.e_te)):
        for col in g.props(kind).values():
            if len(col.owner) and ((col.ts != ts[col.owner]) | (col.te != te[col.owner])).any():
                return False
    return True


def properties_during(
    g: TemporalGraph, owner: int, key: str, window: tuple[int, int], kind: str = VERTEX
) -> list[tuple[Any, Interval]]:
    """Records of ``key`` on ``owner`` (external ID) overlapping ``window``, clipped to it."""
    idx = g.vertex_index(owner) if kind == VERTEX else g.edge_index(owner)
    types = g.v_type if kind == VERTEX else g.e_type
    tname = g.type_name(kind, int(types[idx]))
    if key not in g.schema.keys_of(kind, tname):
        raise GraphError(f"key {key!r} is not defined for type {tname}")
    col = g.props(kind).get(g.schema.key_codes[key])
    if col is None:
        return []
    out = []
    sl = col.records_of(idx)
    for v, ts, te in zip(col.value[sl], col.ts[sl], col.te[sl]):
        lo, hi = max(int(ts), window[0]), min(int(te), window[1])
        if lo < hi:
            out.append((g.pool.values[v], Interval(lo, hi)))
    out.sort(key=lambda r: (r[1].ts, r[1].te))
    return out


# -- ingest format ------------------------------------------------------------


class _Columns:
    def __init__(self, names: tuple[str, ...]) -> None:
        self.cols: dict[str, list[int]] = {n: [] for n in names}

    def add(self, **kw: int) -> None:
        for k, v in kw.items():
            self.cols[k].append(v)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v, dtype=np.int64) for k, v in self.cols.items()}


def _lifespan(rec: dict[str, Any], where: str) -> tuple[int, int]:
    try:
        pair = rec["lifespan"]
        ts, te = int(pair[0]), int(pair[1])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise GraphError(f"malformed lifespan in {where}") from exc
    if len(pair) != 2:
        raise GraphError(f"malformed lifespan in {where}")
    return ts, (INFINITY if te == -1 else te)


def load_graph(source: IO[str] | Iterable[str]) -> TemporalGraph:
    """Parse line-delimited JSON records into a validated graph."""
    schema: GraphSchema | None = None
    pool = ValuePool()
    verts = _Columns(("vid", "type", "ts", "te"))
    edges = _Columns(("eid", "type", "src", "dst", "ts", "te"))
    props: dict[str, dict[str, _Columns]] = {"vprop": {}, "eprop": {}}
    for lineno, line in enumerate(source, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            kind = rec["kind"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GraphError(f"malformed record on line {lineno}") from exc
        if kind == "schema":
            if schema is not None:
                raise GraphError(f"second schema header on line {lineno}")
            schema = GraphSchema.from_json(rec)
            continue
        if schema is None:
            raise GraphError(f"line {lineno}: records before the schema header")
        try:
            if kind == "vertex":
                tcode = schema.vtype_codes.get(rec["type"])
                if tcode is None:
                    raise GraphError(f"vertex {rec['vid']} has unknown type {rec['type']!r}")
                ts, te = _lifespan(rec, f"vertex {rec['vid']}")
                verts.add(vid=int(rec["vid"]), type=tcode, ts=ts, te=te)
            elif kind == "edge":
                tcode = schema.etype_codes.get(rec["type"])
                if tcode is None:
                    raise GraphError(f"edge {rec['eid']} has unknown type {rec['type']!r}")
                ts, te = _lifespan(rec, f"edge {rec['eid']}")
                edges.add(eid=int(rec["eid"]), type=tcode, src=int(rec["src"]), dst=int(rec["dst"]), ts=ts, te=te)
            elif kind in ("vprop", "eprop"):
                ts, te = _lifespan(rec, f"{kind} of {rec['owner']}")
                cols = props[kind].setdefault(rec["key"], _Columns(("owner", "value", "ts", "te")))
                cols.add(owner=int(rec["owner"]), value=pool.intern(rec["value"]), ts=ts, te=te)
            else:
                raise GraphError(f"line {lineno}: unknown record kind {kind!r}")
        except KeyError as exc:
            raise GraphError(f"line {lineno}: {kind} record missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"line {lineno}: malformed {kind} record") from exc
    if schema is None:
        schema = GraphSchema()
    return TemporalGraph.from_arrays(
        schema,
        pool,
        verts.arrays(),
        edges.arrays(),
        {k: c.arrays() for k, c in props["vprop"].items()},
        {k: c.arrays() for k, c in props["eprop"].items()},
    )


def iter_records(g: TemporalGraph) -> Iterator[dict[str, Any]]:
    def span(ts, te):
        return [int(ts), -1 if te >= INFINITY else int(te)]

    yield g.schema.to_json()
    for i in range(g.num_vertices):
        yield {"kind": "vertex", "vid": int(g.v_id[i]), "type": g.type_name(VERTEX, int(g.v_type[i])),
               "lifespan": span(g.v_ts[i], g.v_te[i])}
    for i in range(g.num_edges):
        yield {"kind": "edge", "eid": int(g.e_id[i]), "type": g.type_name(EDGE, int(g.e_type[i])),
               "src": int(g.v_id[g.e_src[i]]), "dst": int(g.v_id[g.e_dst[i]]),
               "lifespan": span(g.e_ts[i], g.e_te[i])}
    for kind, tag, ids in ((VERTEX, "vprop", g.v_id), (EDGE, "eprop", g.e_id)):
        for code in sorted(g.props(kind)):
            col = g.props(kind)[code]
            key = g.schema.key_names[code]
            for o, v, ts, te in zip(col.owner, col.value, col.ts, col.te):
                yield {"kind": tag, "owner": int(ids[o]), "key": key,
                       "value": g.pool.values[v], "lifespan": span(ts, te)}


def dump_graph(g: TemporalGraph, out: IO[str]) -> None:
    for rec in iter_records(g):
        out.write(json.dumps(rec, separators=(",", ":")))
        out.write("\n")


def dumps_graph(g: TemporalGraph) -> str:
    buf = io.StringIO()
    dump_graph(g, buf)
    return buf.getvalue()
