"""Split-point plan enumeration, per-superstep count estimates and a linear time model.

For each superstep of a segment the planner estimates active vertices ``a``,
matched vertices ``m``, active edges ``abar`` and matched edges ``mbar``:

    a_1 = |V_s|                        a_i = |V_s| * (1 - exp(-arriving_i / |V_s|))
    m_i = a_i * sel_i                  abar_i = m_i * (din_i + dout_i)  (direction-restricted)
    mbar_i = abar_i * fbar_i / (|V_s| * dbar_s)

``arriving_i`` is the previous step's mbar scaled by the fraction of its edges
that lead to this step's vertex types. Selectivities come from the histogram
lookups. Equality tests on one type are conditioned on each other through the
joint owner counts; other conjuncts multiply and disjuncts combine as
independent events. A linear model per execution phase turns the counts into
milliseconds.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import IO, Any

import numpy as np

from .engine import Segment, segments
from .graph import EDGE, TYPE_KEY, VERTEX
from .query import BoolExpr, Direction, PathQuery, Predicate, PropClause
from .statistics import GraphStats, StatsError, lookup_H, value_owners

PHASES = ("init", "compute", "scatter", "interval", "partition")
PHASE_VARS = {
    "init": ("a", "m"),
    "compute": ("a", "m", "mbar_prev"),
    "scatter": ("abar", "mbar"),
    "interval": ("a",),
    "partition": ("a",),
}
# Coefficients (ms per unit, then the constant) fitted on a commodity cluster.
DEFAULT_COEFFICIENTS = {
    "init": (9.4e-5, -3.1e-5, 3.83),
    "compute": (7.2e-5, 3.3e-5, 1.8e-5, 1.63),
    "scatter": (7.9e-5, 0.0, -3.81),
    "interval": (-5.1e-6, 8.6e-2),
    "partition": (-8.0e-6, 28.7),
}


class PlanError(ValueError):
    pass


@dataclass
class QueryPlan:
    split: int  # vertex position where the segments meet, 0-based
    segments: list[Segment]

    @property
    def label(self) -> str:
        return f"split@{self.split}"


def enumerate_plans(q: PathQuery) -> list[QueryPlan]:
    """One plan per vertex position."""
    return [QueryPlan(k, segments(q, k)) for k in range(q.n)]


# -- count estimation ------------------------------------------------------------


@dataclass
class StepEstimate:
    a: float = 0.0
    sel: float = 1.0  # matched fraction of active vertices
    f: float = 0.0  # estimated matching vertices of the type
    m: float = 0.0
    abar: float = 0.0
    fbar: float = 0.0
    mbar: float = 0.0
    din: float = 0.0
    dout: float = 0.0
    vsigma: float = 0.0
    scatters: bool = True  # False at the segment's last vertex


@dataclass
class CountEstimates:
    side: str
    steps: list[StepEstimate]


@dataclass
class _Sel:
    sel: float
    din: float
    dout: float
    weight: float  # frequency used to weight degrees


def _type_total(stats: GraphStats, kind: str, tname: str, tau) -> float:
    return lookup_H(stats.tree(kind, tname, TYPE_KEY), None, tau).f


def _clause_sel(stats: GraphStats, kind: str, types: list[str], c: PropClause, basic: bool = False) -> _Sel:
    g = stats.glob
    if c.key == TYPE_KEY:
        n_all = sum(g.count(kind, t) for t in types) or 1
        hit = g.count(kind, c.value) if c.value in types else 0
        frac = hit / n_all if c.op == "==" else 1 - hit / n_all
        din, dout = _type_degrees(stats, kind, [c.value] if c.op == "==" and hit else types)
        return _Sel(frac, din, dout, frac * n_all)
    if not any(k == kind and key == c.key for (k, _, key) in stats.trees):
        raise StatsError(f"missing statistics for {kind} key {c.key!r}")
    num = den = sin = sout = 0.0
    for t in types:
        if (kind, t, c.key) not in stats.trees:
            den += _type_total(stats, kind, t, None)
            continue
        tree = stats.tree(kind, t, c.key)
        op = "!=" if c.op == "!=" else "=="
        est = lookup_H(tree, c.value, None, op)
        ever = value_owners(tree, c.value) if op == "==" and not basic else None
        if ever is not None:
            # a vertex matches if it held the value at any time
            num += ever
            den += g.count(kind, t)
        else:
            num += est.f
            den += _type_total(stats, kind, t, None)
        w = ever if ever is not None else est.f
        sin += w * est.din
        sout += w * est.dout
    sel = min(num / den, 1.0) if den > 0 else 0.0
    n_all = sum(g.count(kind, t) for t in types)
    if num > 0:
        return _Sel(sel, sin / num, sout / num, sel * n_all)
    return _Sel(sel, 0.0, 0.0, 0.0)


def _type_degrees(stats: GraphStats, kind: str, types: list[str]) -> tuple[float, float]:
    g = stats.glob
    if kind != VERTEX:
        return 0.0, 0.0
    n = sum(g.vertex_count.get(t, 0) for t in types)
    if not n:
        return 0.0, 0.0
    din = sum(g.vertex_count.get(t, 0) * g.deg_in.get(t, 0.0) for t in types) / n
    dout = sum(g.vertex_count.get(t, 0) * g.deg_out.get(t, 0.0) for t in types) / n
    return din, dout


def _expr_sel(stats, kind, types, e, basic: bool = False) -> _Sel:
    if isinstance(e, PropClause):
        return _clause_sel(stats, kind, types, e, basic)
    assert isinstance(e, BoolExpr)
    if e.op == "AND" and not basic:
        return _and_sel(stats, kind, types, e)
    a = _expr_sel(stats, kind, types, e.left, basic)
    b = _expr_sel(stats, kind, types, e.right, basic)
    if basic:
        pick = min if e.op == "AND" else max
        w = a.weight + b.weight
        if w <= 0:
            return _Sel(pick(a.sel, b.sel), 0.0, 0.0, 0.0)
        return _Sel(pick(a.sel, b.sel), (a.weight * a.din + b.weight * b.din) / w,
                    (a.weight * a.dout + b.weight * b.dout) / w, pick(a.weight, b.weight))
    sel = a.sel + b.sel - a.sel * b.sel  # clauses are treated as independent
    w = a.weight + b.weight
    if w <= 0:
        return _Sel(sel, 0.0, 0.0, 0.0)
    scale = sel / (a.sel + b.sel) if a.sel + b.sel > 0 else 0.0
    return _Sel(sel, (a.weight * a.din + b.weight * b.din) / w,
                (a.weight * a.dout + b.weight * b.dout) / w, w * scale)


def _conjuncts(e) -> list:
    if isinstance(e, BoolExpr) and e.op == "AND":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _is_value_test(e) -> bool:
    return isinstance(e, PropClause) and e.op in ("==", "CONTAINS") and e.key != TYPE_KEY


def _and_sel(stats: GraphStats, kind: str, types: list[str], e: BoolExpr) -> _Sel:
    """Conjunction selectivity.

    Value tests on a single type are chained through the joint owner counts:
    each test is conditioned on the earlier test that predicts it best. Pairs
    without joint counts, and every other clause, combine as independent.
    """
    parts = _conjuncts(e)
    sels = [_expr_sel(stats, kind, types, p) for p in parts]
    order = sorted(range(len(parts)), key=lambda i: sels[i].sel)
    n = stats.glob.count(kind, types[0]) if len(types) == 1 else 0
    sel = 1.0
    seen: list[int] = []
    for i in order:
        s_i = sels[i].sel
        if n and _is_value_test(parts[i]):
            conds = []
            for j in seen:
                pj, pi = parts[j], parts[i]
                both = stats.joint(kind, types[0], pj.key, pj.value, pi.key, pi.value)
                if both is not None and sels[j].sel > 0:
                    conds.append(both / (sels[j].sel * n))
            if conds:
                s_i = min(1.0, min(conds))
            seen.append(i)
        sel *= s_i
    w = sum(x.weight for x in sels)
    if w <= 0:
        return _Sel(sel, 0.0, 0.0, 0.0)
    return _Sel(sel, sum(x.weight * x.din for x in sels) / w, sum(x.weight * x.dout for x in sels) / w,
                sel * sum(stats.glob.count(kind, t) for t in types))


def _types(stats: GraphStats, kind: str, pred: Predicate) -> list[str]:
    bound = pred.bound_type
    table = stats.glob.vertex_count if kind == VERTEX else stats.glob.edge_count
    if bound is not None:
        return [bound] if bound in table else []
    return sorted(table)


def predicate_selectivity(stats: GraphStats, kind: str, pred: Predicate,
                          basic: bool = False) -> tuple[list[str], _Sel]:
    """Candidate types for ``pred`` and the fraction of their entities that match.

    ``basic`` combines clauses with min under AND and max under OR.
    """
    types = _types(stats, kind, pred)
    if not types:
        return types, _Sel(0.0, 0.0, 0.0, 0.0)
    expr = pred.expr
    # a leading Type == t clause only narrows the candidate types
    if pred.bound_type is not None:
        expr = _strip_type(expr)
    if expr is None:
        din, dout = _type_degrees(stats, kind, types)
        s = _Sel(1.0, din, dout, float(sum(stats.glob.count(kind, t) for t in types)))
    else:
        s = _expr_sel(stats, kind, types, expr, basic)
    if pred.time is not None:
        frac = sum(stats.glob.lifespan_fraction(kind, t, pred.time.cmp, pred.time.interval) *
                   stats.glob.count(kind, t) for t in types)
        total = sum(stats.glob.count(kind, t) for t in types)
        tf = frac / total if total else 0.0
        # lifespan and property clauses are treated as independent
        s = _Sel(min(s.sel, tf) if basic else s.sel * tf, s.din, s.dout, s.weight)
    return types, s


def _strip_type(expr):
    if isinstance(expr, PropClause):
        return None if expr.key == TYPE_KEY and expr.op == "==" else expr
    if expr.op == "AND":
        left = _strip_type(expr.left)
        if left is None:
            return _strip_type(expr.right)
        right = _strip_type(expr.right)
        return left if right is None else BoolExpr("AND", left, right)
    return expr


def _edge_selectivity(stats: GraphStats, vtypes: list[str], direction: Direction, pred: Predicate,
                      basic: bool = False) -> float:
    """Fraction of the incident edges (in ``direction``) of ``vtypes`` that match ``pred``."""
    g = stats.glob
    dirs = {Direction.OUT: ("out",), Direction.IN: ("in",), Direction.BOTH: ("out", "in")}[direction]
    by_type: dict[str, int] = {}
    for vt in vtypes:
        for d in dirs:
            for et, c in g.incident.get(f"{vt}:{d}", {}).items():
                by_type[et] = by_type.get(et, 0) + c
    total = sum(by_type.values())
    if not total:
        return 0.0
    etypes, s = predicate_selectivity(stats, EDGE, pred, basic)
    # property selectivity is measured within the candidate edge types
    hit = sum(by_type.get(et, 0) for et in etypes)
    return hit / total * s.sel


def _reach_fraction(stats: GraphStats, vtypes: list[str], direction: Direction, etypes: list[str],
                    targets: list[str]) -> float:
    """Share of the matching incident edges whose far end has one of the ``targets`` types."""
    dirs = {Direction.OUT: ("out",), Direction.IN: ("in",), Direction.BOTH: ("out", "in")}[direction]
    ets, ots = set(etypes), set(targets)
    hit = total = 0
    for vt in vtypes:
        for d in dirs:
            for key, c in stats.glob.reach.get(f"{vt}:{d}", {}).items():
                et, ot = key.split(">", 1)
                if et in ets:
                    total += c
                    hit += c if ot in ots else 0
    return hit / total if total else 1.0


def _occupancy(balls: float, bins: float) -> float:
    """Expected number of distinct bins hit by ``balls`` uniform throws."""
    if bins <= 0:
        return 0.0
    return bins * -np.expm1(-balls / bins)


def estimate_counts(seg: Segment, stats: GraphStats, basic: bool = False) -> CountEstimates:
    """Per-superstep counts for one segment.

    ``basic`` uses the plain recurrence: a_i = min(mbar_{i-1}, |V_s|), clauses
    combined by min/max, and no adjustment for edge temporal relations, edge
    targets or per-node edge scans.
    """
    g = stats.glob
    out: list[StepEstimate] = []
    arriving = None  # messages expected to reach the next step's vertex types
    for i, step in enumerate(seg.steps):
        types, s = predicate_selectivity(stats, VERTEX, step.vertex, basic)
        vs = float(sum(g.vertex_count.get(t, 0) for t in types))
        if arriving is None:
            a = vs
        else:
            a = min(arriving, vs) if basic else _occupancy(arriving, vs)
        m = a * s.sel
        est = StepEstimate(a=a, sel=s.sel, f=vs * s.sel, m=m, din=s.din, dout=s.dout, vsigma=vs,
                           scatters=step.edge is not None)
        if step.edge is not None:
            d = step.edge.direction
            deg = {Direction.OUT: s.dout, Direction.IN: s.din, Direction.BOTH: s.din + s.dout}[d]
            tdin, tdout = _type_degrees(stats, VERTEX, types)
            tdeg = {Direction.OUT: tdout, Direction.IN: tdin, Direction.BOTH: tdin + tdout}[d]
            # tree nodes scan their edges separately; ETR steps key nodes by the incoming edge
            nodes = m if basic or arriving is None or step.etr is None else max(m, arriving * s.sel)
            est.abar = nodes * deg
            sel_e = _edge_selectivity(stats, types, d, step.edge.predicate, basic)
            est.fbar = vs * tdeg * sel_e
            denom = vs * tdeg
            est.mbar = est.abar * est.fbar / denom if denom > 0 else 0.0
            if basic:
                arriving = est.mbar
                out.append(est)
                continue
            etypes = _types(stats, EDGE, step.edge.predicate)
            if step.etr is not None and i > 0:
                into = _types(stats, EDGE, seg.steps[i - 1].edge.predicate)
                left, right = (etypes, into) if step.reverse else (into, etypes)
                est.mbar *= g.etr_fraction(left, right, step.etr)
            nxt = _types(stats, VERTEX, seg.steps[i + 1].vertex)
            arriving = est.mbar * _reach_fraction(stats, types, d, etypes, nxt)
        out.append(est)
    return CountEstimates(seg.side, out)


# -- time model ---------------------------------------------------------------------


@dataclass
class TimeModel:
    coef: dict[str, tuple[float, ...]] = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    r2: dict[str, float] = field(default_factory=dict)

    def phase(self, name: str, *xs: float) -> float:
        c = self.coef[name]
        return float(np.dot(c[:-1], xs) + c[-1])

    def to_json(self) -> dict:
        return {"coefficients": {k: list(v) for k, v in self.coef.items()}, "r2": self.r2}

    @classmethod
    def from_json(cls, obj: dict) -> "TimeModel":
        coef = {k: tuple(float(x) for x in v) for k, v in obj["coefficients"].items()}
        for k, names in PHASE_VARS.items():
            if len(coef.get(k, ())) != len(names) + 1:
                raise PlanError(f"coefficients for {k!r} need {len(names) + 1} values")
        return cls(coef, dict(obj.get("r2", {})))

    def dump(self, out: IO[str]) -> None:
        json.dump(self.to_json(), out, indent=1)

    @classmethod
    def load(cls, src: IO[str]) -> "TimeModel":
        return cls.from_json(json.load(src))


@dataclass
class PlanCost:
    plan: QueryPlan
    counts: list[CountEstimates]
    per_step: list[float]  # T_i per superstep
    phases: list[dict[str, float]]

    @property
    def total(self) -> float:
        return float(sum(self.per_step))


def step_phases(tm: TimeModel, est: StepEstimate, first: bool, mbar_prev: float) -> dict[str, float]:
    ph = {}
    if first:
        ph["init"] = tm.phase("init", est.a, est.m)
    else:
        ph["compute"] = tm.phase("compute", est.a, est.m, mbar_prev)
    # the split vertex runs no scatter
    if est.scatters:
        ph["scatter"] = tm.phase("scatter", est.abar, est.mbar)
    ph["interval"] = tm.phase("interval", est.a)
    ph["partition"] = tm.phase("partition", est.a)
    return ph


def estimate_time(plan: QueryPlan, counts: list[CountEstimates], tm: TimeModel) -> PlanCost:
    """Per-superstep times; concurrent segments add their phase costs."""
    nsteps = max(len(c.steps) for c in counts)
    per_step, phases = [], []
    for i in range(nsteps):
        acc: dict[str, float] = {}
        for c in counts:
            if i >= len(c.steps):
                continue
            prev = c.steps[i - 1].mbar if i else 0.0
            for k, v in step_phases(tm, c.steps[i], i == 0, prev).items():
                acc[k] = acc.get(k, 0.0) + v
        phases.append(acc)
        per_step.append(max(sum(acc.values()), 0.0))
    return PlanCost(plan, counts, per_step, phases)


def cost_plans(q: PathQuery, stats: GraphStats, tm: TimeModel | None = None,
               basic: bool = False) -> list[PlanCost]:
    tm = tm or TimeModel()
    out = []
    for plan in enumerate_plans(q):
        counts = [estimate_counts(s, stats, basic) for s in plan.segments]
        out.append(estimate_time(plan, counts, tm))
    return out


def select_plan(q: PathQuery, stats: GraphStats, tm: TimeModel | None = None,
                basic: bool = False) -> tuple[QueryPlan, list[PlanCost]]:
    """Cheapest plan by estimated time; ties go to the lowest split position."""
    costs = cost_plans(q, stats, tm, basic)
    best = min(costs, key=lambda c: (round(c.total, 9), c.plan.split))
    return best.plan, costs


def explain(costs: list[PlanCost]) -> str:
    """Per-plan, per-superstep estimate table."""
    head = f"{'plan':<10}{'side':<7}{'ss':>3}{'a':>11}{'sel':>10}{'m':>11}{'abar':>11}{'fbar':>11}" \
           f"{'mbar':>11}{'T_ss(ms)':>11}"
    lines = [head, "-" * len(head)]
    for c in costs:
        for ce in c.counts:
            for i, s in enumerate(ce.steps):
                t = c.per_step[i] if ce is c.counts[0] else float("nan")
                lines.append(f"{c.plan.label:<10}{ce.side:<7}{i + 1:>3}{s.a:>11.3g}{s.sel:>10.3g}{s.m:>11.3g}"
                             f"{s.abar:>11.3g}{s.fbar:>11.3g}{s.mbar:>11.3g}"
                             + (f"{t:>11.1f}" if t == t else f"{'':>11}"))
        lines.append(f"{c.plan.label:<10}{'total':<7}{'':>3}{'':>11}{'':>10}{'':>11}{'':>11}{'':>11}{'':>11}"
                     f"{c.total:>11.1f}")
    return "\n".join(lines)


# -- calibration ---------------------------------------------------------------------


@dataclass
class Sample:
    phase: str
    x: tuple[float, ...]
    ms: float


def samples_from_stats(exec_stats) -> list[Sample]:
    """Per-phase regression samples from one measured execution."""
    out = []
    prev_mbar = 0.0
    for i, ss in enumerate(exec_stats.supersteps):
        if i == 0:
            out.append(Sample("init", (ss.active, ss.matched), ss.ms["init"]))
        else:
            out.append(Sample("compute", (ss.active, ss.matched, prev_mbar), ss.ms["compute"]))
        if ss.active_edges or ss.matched_edges:
            out.append(Sample("scatter", (ss.active_edges, ss.matched_edges), ss.ms["scatter"]))
        out.append(Sample("interval", (ss.active,), ss.ms["interval"]))
        out.append(Sample("partition", (ss.active,), ss.ms["partition"]))
        prev_mbar = ss.matched_edges
    return out


def calibrate(samples: list[Sample], base: TimeModel | None = None) -> TimeModel:
    """Least-squares fit per phase; phases without samples keep ``base`` coefficients."""
    base = base or TimeModel()
    coef = dict(base.coef)
    r2 = {}
    by: dict[str, list[Sample]] = {}
    for s in samples:
        if s.phase not in PHASE_VARS:
            raise PlanError(f"unknown phase {s.phase!r}")
        by.setdefault(s.phase, []).append(s)
    for phase, ss in by.items():
        k = len(PHASE_VARS[phase]) + 1
        if len(ss) < 3 * k:
            raise PlanError(f"phase {phase!r} needs at least {3 * k} samples, got {len(ss)}")
        X = np.array([list(s.x) + [1.0] for s in ss], dtype=np.float64)
        y = np.array([s.ms for s in ss], dtype=np.float64)
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < k:
            raise PlanError(f"phase {phase!r}: design matrix is rank deficient ({rank} < {k})")
        resid = y - X @ beta
        tss = float(((y - y.mean()) ** 2).sum())
        r2[phase] = 1.0 - float((resid ** 2).sum()) / tss if tss > 0 else 1.0
        coef[phase] = tuple(float(b) for b in beta)
    return TimeModel(coef, r2)


def timed_select(q: PathQuery, stats: GraphStats, tm: TimeModel | None = None) -> tuple[QueryPlan, float]:
    t0 = time.perf_counter()
    plan, _ = select_plan(q, stats, tm)
    return plan, (time.perf_counter() - t0) * 1e3


def counts_from_table(rows: list[dict[str, Any]]) -> CountEstimates:
    """Build estimates from literal per-superstep counts."""
    return CountEstimates("left", [StepEstimate(**r) for r in rows])
