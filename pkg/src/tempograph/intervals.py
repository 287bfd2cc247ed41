"""Discrete half-open intervals, the comparator set used by queries, and TimeWarp."""
from __future__ import annotations

import enum
from typing import Any, Hashable, Iterable, NamedTuple, Sequence

# Larger than any finite time-point; fits in int64 so numpy columns can hold it.
INFINITY = 2**62


class Interval(NamedTuple):
    ts: int
    te: int

    @classmethod
    def of(cls, ts: int, te: int) -> "Interval":
        if ts < 0:
            raise ValueError(f"negative start time {ts}")
        if not ts < te:
            raise ValueError(f"empty interval [{ts}, {te})")
        return cls(int(ts), int(te))

    def duration(self) -> int:
        return self.te - self.ts

    def contains_point(self, t: int) -> bool:
        return self.ts <= t < self.te

    def to_json(self) -> list[int]:
        return [self.ts, -1 if self.te >= INFINITY else self.te]

    @classmethod
    def from_json(cls, pair: Sequence[int]) -> "Interval":
        if len(pair) != 2:
            raise ValueError(f"interval must have two elements: {pair!r}")
        ts, te = int(pair[0]), int(pair[1])
        return cls.of(ts, INFINITY if te == -1 else te)

    def __str__(self) -> str:
        te = "inf" if self.te >= INFINITY else str(self.te)
        return f"[{self.ts},{te})"


class Cmp(enum.Enum):
    """Boolean interval comparators. Values are the query-text keywords."""

    FULLY_BEFORE = "before"
    STARTS_BEFORE = "sbefore"
    FULLY_AFTER = "after"
    STARTS_AFTER = "safter"
    DURING = "during"
    EQUALS = "equals"
    DURING_OR_EQUALS = "within"
    OVERLAPS = "ov"
    NOT_OVERLAPS = "nov"

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    Cmp.FULLY_BEFORE: "<<",
    Cmp.STARTS_BEFORE: "<",
    Cmp.FULLY_AFTER: ">>",
    Cmp.STARTS_AFTER: ">",
    Cmp.DURING: "⊂",
    Cmp.EQUALS: "=",
    Cmp.DURING_OR_EQUALS: "⊆",
    Cmp.OVERLAPS: "ov",
    Cmp.NOT_OVERLAPS: "nov",
}

# The subset allowed in time clauses and ETR clauses.
TIME_COMPARATORS = frozenset(
    {
        Cmp.STARTS_BEFORE,
        Cmp.FULLY_BEFORE,
        Cmp.STARTS_AFTER,
        Cmp.FULLY_AFTER,
        Cmp.OVERLAPS,
        Cmp.NOT_OVERLAPS,
    }
)


def relate(a: tuple[int, int], b: tuple[int, int], cmp: Cmp) -> bool:
    """Truth value of ``a cmp b`` for half-open intervals."""
    a_ts, a_te = a
    b_ts, b_te = b
    if cmp is Cmp.OVERLAPS:
        return a_ts < b_te and b_ts < a_te
    if cmp is Cmp.NOT_OVERLAPS:
        return not (a_ts < b_te and b_ts < a_te)
    if cmp is Cmp.FULLY_BEFORE:
        return a_te <= b_ts
    if cmp is Cmp.FULLY_AFTER:
        return a_ts >= b_te
    if cmp is Cmp.STARTS_BEFORE:
        return a_ts < b_ts
    if cmp is Cmp.STARTS_AFTER:
        return a_ts > b_ts
    if cmp is Cmp.EQUALS:
        return a_ts == b_ts and a_te == b_te
    if cmp is Cmp.DURING_OR_EQUALS:
        return b_ts <= a_ts and a_te <= b_te
    if cmp is Cmp.DURING:
        return b_ts <= a_ts and a_te <= b_te and (a_ts, a_te) != (b_ts, b_te)
    raise ValueError(cmp)


def intersect(a: tuple[int, int], b: tuple[int, int]) -> Interval | None:
    ts = max(a[0], b[0])
    te = min(a[1], b[1])
    if ts < te:
        return Interval(ts, te)
    return None


def time_warp(
    items: Iterable[tuple[tuple[int, int], Any]],
) -> list[tuple[Interval, list[Any]]]:
    """Split the union of the input intervals at every endpoint.

    Each output piece carries, in input order, the payloads whose interval
    contains it. Pieces are disjoint and sorted; adjacent pieces with an
    identical payload set are merged so the partition is minimal.
    """
    items = list(items)
    if not items:
        raise ValueError("time_warp needs at least one item")
    points = sorted({t for (iv, _) in items for t in iv})
    pieces: list[tuple[Interval, list[Any]]] = []
    members: list[tuple[int, ...]] = []
    for lo, hi in zip(points, points[1:]):
        idx = tuple(i for i, (iv, _) in enumerate(items) if iv[0] <= lo and hi <= iv[1])
        if not idx:
            continue
        if pieces and members[-1] == idx and pieces[-1][0].te == lo:
            pieces[-1] = (Interval(pieces[-1][0].ts, hi), pieces[-1][1])
            continue
        pieces.append((Interval(lo, hi), [items[i][1] for i in idx]))
        members.append(idx)
    return pieces


def coalesce(pieces: Iterable[tuple[tuple[int, int], Hashable]]) -> list[tuple[Interval, Hashable]]:
    """Merge sorted, adjacent (interval, value) pairs that carry an equal value."""
    out: list[tuple[Interval, Hashable]] = []
    for iv, val in pieces:
        if out and out[-1][0].te == iv[0] and out[-1][1] == val:
            out[-1] = (Interval(out[-1][0].ts, iv[1]), val)
        else:
            out.append((Interval(iv[0], iv[1]), val))
    return out


def union_all(intervals: Iterable[tuple[int, int]]) -> list[Interval]:
    """Sorted maximal intervals covering the input; adjacent ones are joined."""
    out: list[Interval] = []
    for ts, te in sorted(intervals):
        if out and ts <= out[-1].te:
            if te > out[-1].te:
                out[-1] = Interval(out[-1].ts, te)
        else:
            out.append(Interval(ts, te))
    return out
