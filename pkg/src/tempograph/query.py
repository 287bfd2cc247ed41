"""Path-query text syntax, AST, canonical printer and schema validation.

Example::

    {Type=="Person" && Country=="UK"} -[Type=="Follows"]-> {Type=="Person"} ETR(>>)
        -[Type=="Follows"]-> {Type=="Person" && Name=="Don"} AGG count(*)

Vertex predicates sit in braces (a bare ``*`` is also accepted), edge
predicates in ``-[..]->`` (out), ``<-[..]-`` (in) or ``-[..]-`` (either).
Boolean connectives chain to the right without precedence: ``a && b || c``
reads as ``a && (b || c)``. A time clause ``LIFESPAN <cmp> [ts,te]`` may only
lead a predicate, joined to the rest by ``&&``.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Mapping, Union

from .graph import EDGE, TYPE_KEY, VERTEX, GraphSchema
from .intervals import INFINITY, TIME_COMPARATORS, Cmp, Interval


class QueryError(ValueError):
    def __init__(self, message: str, pos: int | None = None) -> None:
        super().__init__(message if pos is None else f"{message} (at offset {pos})")
        self.pos = pos


class Direction(enum.Enum):
    OUT = "->"
    IN = "<-"
    BOTH = "--"


PROP_OPS = ("==", "!=", "CONTAINS")


@dataclass(frozen=True)
class PropClause:
    key: str
    op: str
    value: Union[str, int]
    key_code: int | None = field(default=None, compare=False)
    cluster: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.key} {self.op} {json.dumps(self.value, ensure_ascii=False)}"


@dataclass(frozen=True)
class TimeClause:
    cmp: Cmp
    interval: Interval

    def __str__(self) -> str:
        te = -1 if self.interval.te >= INFINITY else self.interval.te
        return f"LIFESPAN {self.cmp.value} [{self.interval.ts},{te}]"


@dataclass(frozen=True)
class BoolExpr:
    op: str  # "AND" | "OR"
    left: PropClause
    right: Union[PropClause, "BoolExpr"]

    def __str__(self) -> str:
        sym = "&&" if self.op == "AND" else "||"
        return f"{self.left} {sym} {self.right}"


Expr = Union[PropClause, BoolExpr]


def iter_clauses(expr: Expr | None) -> Iterator[PropClause]:
    while expr is not None:
        if isinstance(expr, PropClause):
            yield expr
            return
        yield expr.left
        expr = expr.right


@dataclass(frozen=True)
class Predicate:
    time: TimeClause | None = None
    expr: Expr | None = None

    @property
    def is_wildcard(self) -> bool:
        return self.time is None and self.expr is None

    @property
    def bound_type(self) -> str | None:
        """The type named by a ``Type == X`` clause reachable through AND only."""
        expr = self.expr
        while expr is not None:
            if isinstance(expr, BoolExpr) and expr.op == "OR":
                return None
            head = expr if isinstance(expr, PropClause) else expr.left
            if head.key == TYPE_KEY and head.op == "==":
                return str(head.value)
            if isinstance(expr, PropClause):
                return None
            expr = expr.right
        return None

    def clauses(self) -> list[PropClause]:
        return list(iter_clauses(self.expr))

    def __str__(self) -> str:
        if self.is_wildcard:
            return "*"
        parts = []
        if self.time is not None:
            parts.append(str(self.time))
        if self.expr is not None:
            parts.append(str(self.expr))
        return " && ".join(parts)


@dataclass(frozen=True)
class EdgePredicate:
    predicate: Predicate
    direction: Direction = Direction.BOTH

    def __str__(self) -> str:
        if self.direction is Direction.OUT:
            return f"-[{self.predicate}]->"
        if self.direction is Direction.IN:
            return f"<-[{self.predicate}]-"
        return f"-[{self.predicate}]-"


@dataclass(frozen=True)
class Aggregate:
    op: str  # "count" | "min" | "max"
    key: str | None = None  # None is the wildcard

    def __str__(self) -> str:
        return f"AGG {self.op}({self.key or '*'})"


@dataclass(frozen=True)
class PathQuery:
    vertices: tuple[Predicate, ...]
    edges: tuple[EdgePredicate, ...]
    etr: tuple[Cmp | None, ...]
    aggregate: Aggregate | None = None

    def __post_init__(self) -> None:
        n = len(self.vertices)
        if n < 2:
            raise QueryError("a path query needs at least two vertex predicates")
        if len(self.edges) != n - 1 or len(self.etr) != n:
            raise QueryError("a path query has n vertex and n-1 edge predicates")
        if self.etr[0] is not None or self.etr[-1] is not None:
            raise QueryError("ETR clauses are only allowed on intermediate vertices")

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def hops(self) -> int:
        return len(self.edges)

    @property
    def split_points(self) -> tuple[int, ...]:
        """Every vertex position can act as a split point."""
        return tuple(range(self.n))

    def __str__(self) -> str:
        parts = []
        for i, v in enumerate(self.vertices):
            text = "{" + str(v) + "}"
            if self.etr[i] is not None:
                text += f" ETR({self.etr[i].value})"
            parts.append(text)
            if i < len(self.edges):
                parts.append(str(self.edges[i]))
        if self.aggregate is not None:
            parts.append(str(self.aggregate))
        return " ".join(parts)

    # canonical structured form used by fixtures
    def to_dict(self) -> dict[str, Any]:
        return {
            "vertices": [_pred_to_dict(p) for p in self.vertices],
            "edges": [{"direction": e.direction.name, **_pred_to_dict(e.predicate)} for e in self.edges],
            "etr": [c.name if c else None for c in self.etr],
            "aggregate": None if self.aggregate is None else
            {"op": self.aggregate.op, "key": self.aggregate.key},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PathQuery":
        agg = d.get("aggregate")
        return cls(
            vertices=tuple(_pred_from_dict(p) for p in d["vertices"]),
            edges=tuple(EdgePredicate(_pred_from_dict(e), Direction[e["direction"]]) for e in d["edges"]),
            etr=tuple(Cmp[c] if c else None for c in d["etr"]),
            aggregate=None if agg is None else Aggregate(agg["op"], agg["key"]),
        )


def _pred_to_dict(p: Predicate) -> dict[str, Any]:
    return {
        "time": None if p.time is None else {"cmp": p.time.cmp.name, "interval": p.time.interval.to_json()},
        "expr": _expr_to_dict(p.expr),
    }


def _expr_to_dict(e: Expr | None) -> Any:
    if e is None:
        return None
    if isinstance(e, PropClause):
        return {"key": e.key, "op": e.op, "value": e.value}
    return {"op": e.op, "left": _expr_to_dict(e.left), "right": _expr_to_dict(e.right)}


def _pred_from_dict(d: Mapping[str, Any]) -> Predicate:
    t = d.get("time")
    time = None if t is None else TimeClause(Cmp[t["cmp"]], Interval.from_json(t["interval"]))
    return Predicate(time=time, expr=_expr_from_dict(d.get("expr")))


def _expr_from_dict(d: Any) -> Expr | None:
    if d is None:
        return None
    if "key" in d:
        return PropClause(d["key"], d["op"], d["value"])
    return BoolExpr(d["op"], _expr_from_dict(d["left"]), _expr_from_dict(d["right"]))


# -- lexer ---------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<edge_in_open><-\[)
  | (?P<edge_out_close>\]->)
  | (?P<edge_open>-\[)
  | (?P<edge_both_close>\]-(?![\d]))
  | (?P<cmpsym><<|>>|==|!=|&&|\|\||<|>|∋|≪|≫|≺|≻|⊓̸|⊓)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\](),*])
    """,
    re.VERBOSE,
)

_CMP_WORDS = {c.value: c for c in Cmp if c in TIME_COMPARATORS}
_CMP_SYMBOLS = {
    "<<": Cmp.FULLY_BEFORE, "≪": Cmp.FULLY_BEFORE,
    "<": Cmp.STARTS_BEFORE, "≺": Cmp.STARTS_BEFORE,
    ">>": Cmp.FULLY_AFTER, "≫": Cmp.FULLY_AFTER,
    ">": Cmp.STARTS_AFTER, "≻": Cmp.STARTS_AFTER,
    "⊓": Cmp.OVERLAPS, "⊓̸": Cmp.NOT_OVERLAPS,
}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QueryError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise QueryError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.pos)
        return self.advance()

    def is_word(self, *words: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text.upper() in words

    # path := vertex (edge vertex)+ [AGG aggregate]
    def parse_path(self) -> PathQuery:
        vertices, etrs, edges = [], [], []
        v, etr = self.parse_vertex()
        vertices.append(v)
        etrs.append(etr)
        while self.tok.kind in ("edge_open", "edge_in_open"):
            edges.append(self.parse_edge())
            v, etr = self.parse_vertex()
            vertices.append(v)
            etrs.append(etr)
        agg = None
        if self.is_word("AGG"):
            self.advance()
            agg = self.parse_aggregate()
        if self.tok.kind != "eof":
            raise QueryError(f"unexpected {self.tok.text!r}", self.tok.pos)
        if len(vertices) < 2:
            raise QueryError("a path query needs at least one edge predicate", self.tok.pos)
        if etrs[0] is not None or etrs[-1] is not None:
            raise QueryError("ETR clauses are only allowed on intermediate vertices")
        return PathQuery(tuple(vertices), tuple(edges), tuple(etrs), agg)

    def parse_vertex(self) -> tuple[Predicate, Cmp | None]:
        t = self.tok
        if t.kind == "punct" and t.text == "*":
            self.advance()
            pred = Predicate()
        else:
            self.expect("punct", "{")
            pred = self.parse_predicate(closer=("punct", "}"))
            self.expect("punct", "}")
        etr = None
        if self.is_word("ETR"):
            self.advance()
            self.expect("punct", "(")
            etr = self.parse_cmp()
            self.expect("punct", ")")
        return pred, etr

    def parse_edge(self) -> EdgePredicate:
        opener = self.advance()
        if opener.kind == "edge_in_open":
            pred = self.parse_predicate(closer=("edge_both_close", None))
            t = self.tok
            if t.kind != "edge_both_close":
                raise QueryError("an incoming edge predicate must close with ']-'", t.pos)
            self.advance()
            return EdgePredicate(pred, Direction.IN)
        pred = self.parse_predicate(closer=("edge_out_close", None))
        t = self.advance()
        if t.kind == "edge_out_close":
            return EdgePredicate(pred, Direction.OUT)
        if t.kind == "edge_both_close":
            return EdgePredicate(pred, Direction.BOTH)
        raise QueryError(f"expected ']->' or ']-', found {t.text!r}", t.pos)

    def parse_predicate(self, closer) -> Predicate:
        t = self.tok
        if t.kind == "punct" and t.text == "*":
            self.advance()
            return Predicate()
        time = None
        if self.is_word("LIFESPAN"):
            self.advance()
            cmp = self.parse_cmp()
            time = TimeClause(cmp, self.parse_interval())
            if not self._at_and():
                return Predicate(time=time)
            self.advance()
        return Predicate(time=time, expr=self.parse_bool())

    def _at_and(self) -> bool:
        return (self.tok.kind == "cmpsym" and self.tok.text == "&&") or self.is_word("AND")

    def _at_or(self) -> bool:
        return (self.tok.kind == "cmpsym" and self.tok.text == "||") or self.is_word("OR")

    def parse_bool(self) -> Expr:
        left = self.parse_prop()
        if self._at_and() or self._at_or():
            op = "AND" if self._at_and() else "OR"
            self.advance()
            if self.is_word("LIFESPAN"):
                raise QueryError("a time clause must lead its predicate", self.tok.pos)
            return BoolExpr(op, left, self.parse_bool())
        return left

    def parse_prop(self) -> PropClause:
        key = self.expect("ident")
        t = self.tok
        if t.kind == "cmpsym" and t.text in ("==", "!="):
            op = t.text
        elif t.kind == "cmpsym" and t.text == "∋":
            op = "CONTAINS"
        elif self.is_word("CONTAINS"):
            op = "CONTAINS"
        else:
            raise QueryError(f"expected ==, != or CONTAINS after {key.text!r}", t.pos)
        self.advance()
        return PropClause(key.text, op, self.parse_value())

    def parse_value(self) -> str | int:
        t = self.advance()
        if t.kind == "string":
            return json.loads(t.text)
        if t.kind == "number":
            return int(t.text)
        raise QueryError(f"expected a literal value, found {t.text!r}", t.pos)

    def parse_cmp(self) -> Cmp:
        t = self.advance()
        if t.kind == "cmpsym" and t.text in _CMP_SYMBOLS:
            return _CMP_SYMBOLS[t.text]
        if t.kind == "ident" and t.text.lower() in _CMP_WORDS:
            return _CMP_WORDS[t.text.lower()]
        raise QueryError(f"unknown time comparator {t.text!r}", t.pos)

    def parse_interval(self) -> Interval:
        start = self.expect("punct", "[")
        ts = int(self.expect("number").text)
        self.expect("punct", ",")
        if self.is_word("INF"):
            self.advance()
            te = -1
        else:
            te = int(self.expect("number").text)
        t = self.tok
        if t.kind == "punct" and t.text in ("]", ")"):
            self.advance()
        else:
            raise QueryError("expected ']' to close the interval", t.pos)
        try:
            return Interval.from_json([ts, te])
        except ValueError as exc:
            raise QueryError(str(exc), start.pos) from None

    def parse_aggregate(self) -> Aggregate:
        t = self.expect("ident")
        op = t.text.lower()
        if op not in ("count", "min", "max"):
            raise QueryError(f"unknown aggregate {t.text!r}", t.pos)
        self.expect("punct", "(")
        if self.tok.kind == "punct" and self.tok.text == "*":
            self.advance()
            key = None
        else:
            key = self.expect("ident").text
        self.expect("punct", ")")
        if key is None and op != "count":
            raise QueryError(f"{op} needs a property key, not '*'", t.pos)
        return Aggregate(op, key)


def parse(text: str, schema: GraphSchema | None = None, clusters=None) -> PathQuery:
    """Parse query text; with a schema the result is also validated and key-coded.

    ``clusters`` maps ``(kind, type, key)`` to a value->cluster dictionary and
    tags matching literals with their cluster id for the planner.
    """
    q = _Parser(text).parse_path()
    if schema is not None:
        q = validate(q, schema)
    if clusters:
        q = _tag_clusters(q, clusters)
    return q


def _tag_clusters(q: PathQuery, clusters) -> PathQuery:
    def tag(pred: Predicate, kind: str) -> Predicate:
        t = pred.bound_type

        def walk(e):
            if e is None:
                return None
            if isinstance(e, PropClause):
                cmap = clusters.get((kind, t, e.key))
                if cmap and e.key != TYPE_KEY and e.value in cmap:
                    return replace(e, cluster=cmap[e.value])
                return e
            return BoolExpr(e.op, walk(e.left), walk(e.right))

        return replace(pred, expr=walk(pred.expr))

    return replace(
        q,
        vertices=tuple(tag(p, VERTEX) for p in q.vertices),
        edges=tuple(replace(e, predicate=tag(e.predicate, EDGE)) for e in q.edges),
    )


def validate(q: PathQuery, schema: GraphSchema) -> PathQuery:
    """Check keys and types against ``schema`` and attach key codes."""
    if q.etr[0] is not None or q.etr[-1] is not None:
        raise QueryError("ETR clauses are only allowed on intermediate vertices")
    vertices = tuple(_check_pred(p, VERTEX, schema, i) for i, p in enumerate(q.vertices))
    edges = tuple(replace(e, predicate=_check_pred(e.predicate, EDGE, schema, i)) for i, e in enumerate(q.edges))
    for c in q.etr:
        if c is not None and c not in TIME_COMPARATORS:
            raise QueryError(f"comparator {c.value!r} is not allowed in an ETR clause")
    agg = q.aggregate
    if agg is not None:
        if agg.op not in ("count", "min", "max"):
            raise QueryError(f"unknown aggregate {agg.op!r}")
        if agg.key is None and agg.op != "count":
            raise QueryError(f"{agg.op} needs a property key, not '*'")
        if agg.key is not None:
            last_t = q.vertices[-1].bound_type
            allowed = schema.keys_of(VERTEX, last_t) if last_t else list(schema.key_codes)
            if agg.key not in allowed:
                raise QueryError(f"aggregate key {agg.key!r} is not a key of the last vertex type")
    return PathQuery(vertices, edges, q.etr, agg)


def _check_pred(p: Predicate, kind: str, schema: GraphSchema, pos: int) -> Predicate:
    label = f"{kind} predicate {pos + 1}"
    if p.time is not None and p.time.cmp not in TIME_COMPARATORS:
        raise QueryError(f"{label}: comparator {p.time.cmp.value!r} not allowed in a time clause")
    types = schema.types(kind)
    bound = p.bound_type
    if bound is not None and bound not in types:
        raise QueryError(f"{label}: unknown {kind} type {bound!r}")
    allowed = set(schema.keys_of(kind, bound)) if bound else {
        k for t in types for k in schema.keys_of(kind, t)}

    def walk(e):
        if e is None:
            return None
        if isinstance(e, BoolExpr):
            return BoolExpr(e.op, walk(e.left), walk(e.right))
        if e.op not in PROP_OPS:
            raise QueryError(f"{label}: unknown operator {e.op!r}")
        if e.key == TYPE_KEY:
            if e.op == "CONTAINS":
                raise QueryError(f"{label}: Type only supports == and !=")
            if e.value not in types:
                raise QueryError(f"{label}: unknown {kind} type {e.value!r}")
            return e
        if e.key not in allowed:
            raise QueryError(f"{label}: unknown key {e.key!r}")
        return replace(e, key_code=schema.key_codes[e.key])

    return replace(p, expr=walk(p.expr))
