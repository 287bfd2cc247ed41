"""Command-line interface: generate, load, stats, plan, query, bench, calibrate."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .engine import Engine, QueryTimeout
from .generator import TEMPLATES, DegreeModel, GenConfig, WorkloadError, gen_graph, gen_queries, write_workload
from .graph import GraphError, TemporalGraph, dump_graph, is_static, load_graph
from .kernels import BACKEND
from .partition import partition
from .planner import PlanError, TimeModel, calibrate, explain, samples_from_stats, select_plan
from .query import QueryError, parse, validate
from .statistics import GraphStats, StatsError, build_stats

log = logging.getLogger("tempograph")

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_TIMEOUT = 5
EXIT_STALE = 6
DEFAULT_TIMEOUT_MS = 600_000


class StaleStats(RuntimeError):
    pass


# -- helpers ----------------------------------------------------------------------


def _load(path: str) -> TemporalGraph:
    with open(path) as fh:
        return load_graph(fh)


def _stats_path(args) -> Path:
    return Path(args.stats) if getattr(args, "stats", None) else Path(str(args.graph) + ".stats.json")


def _load_stats(args, g: TemporalGraph, build_if_missing: bool = True) -> GraphStats:
    path = _stats_path(args)
    if not path.exists():
        if not build_if_missing:
            raise FileNotFoundError(path)
        log.info("no statistics at %s; building them", path)
        st = build_stats(g, theta=getattr(args, "theta", None))
        with open(path, "w") as fh:
            st.dump(fh)
        return st
    with open(path) as fh:
        st = GraphStats.load(fh)
    if st.graph_hash != g.content_hash() and not getattr(args, "force", False):
        raise StaleStats(f"statistics in {path} were built for a different graph (use --force to ignore)")
    return st


def _time_model(args) -> TimeModel:
    if getattr(args, "coefficients", None):
        with open(args.coefficients) as fh:
            return TimeModel.load(fh)
    return TimeModel()


def _queries(args) -> list[tuple[str, str]]:
    """(label, text) pairs from a literal query, a file or a workload directory."""
    src = args.query
    if src.lstrip().startswith("{"):
        return [("query", src)]
    p = Path(src)
    if p.is_dir():
        man = p / "manifest.json"
        names = json.loads(man.read_text())["templates"] if man.exists() else {
            f.stem: {"file": f.name} for f in sorted(p.glob("*.txt"))}
        out = []
        for name, meta in names.items():
            for line in (p / meta["file"]).read_text().splitlines():
                if line.strip():
                    out.append((name, line.strip()))
        return out
    if p.is_file():
        return [(p.stem, line.strip()) for line in p.read_text().splitlines() if line.strip()]
    return [("query", src)]


def _engine(args, g: TemporalGraph) -> Engine:
    asg = partition(g, workers=args.workers, per_type=args.partitions_per_type, seed=args.seed)
    return Engine(g, asg, workers=args.workers)


@dataclass
class QueryRecord:
    label: str
    query: str
    split: int
    estimated_ms: float | None
    measured_ms: float | None
    results: int | None
    status: str  # done | timeout | error
    error: str | None = None
    phases: dict[str, float] = field(default_factory=dict)
    plans: dict[int, float] | None = None  # split -> measured ms, with --all-plans
    estimates: dict[int, float] | None = None


@dataclass
class RunReport:
    config: dict[str, Any]
    queries: list[QueryRecord] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        done = [q for q in self.queries if q.status == "done"]
        times = np.array([q.measured_ms for q in done], dtype=np.float64)
        phases: dict[str, float] = {}
        for q in done:
            for k, v in q.phases.items():
                phases[k] = phases.get(k, 0.0) + v
        out: dict[str, Any] = {
            "queries": len(self.queries),
            "completed": len(done),
            "completion_pct": 100.0 * len(done) / len(self.queries) if self.queries else 100.0,
            "timeouts": sum(q.status == "timeout" for q in self.queries),
            "errors": sum(q.status == "error" for q in self.queries),
            "phase_ms": {k: round(v, 3) for k, v in phases.items()},
        }
        if len(times):
            out.update(mean_ms=float(times.mean()), p50_ms=float(np.percentile(times, 50)),
                       p90_ms=float(np.percentile(times, 90)), max_ms=float(times.max()))
        return out

    def to_json(self) -> dict:
        return {"config": self.config, "summary": self.summary(), "queries": [asdict(q) for q in self.queries]}


def _run_one(eng: Engine, g, label, text, args, stats, tm) -> QueryRecord:
    try:
        q = parse(text)
        validate(q, g.schema)
    except QueryError as exc:
        return QueryRecord(label, text, -1, None, None, None, "error", str(exc))
    est = None
    estimates = None
    if args.split is not None:
        split = args.split
    elif stats is not None:
        plan, costs = select_plan(q, stats, tm, args.basic_estimates)
        split = plan.split
        estimates = {c.plan.split: c.total for c in costs}
        est = estimates[split]
    else:
        split = q.n - 1
    if not 0 <= split < q.n:
        return QueryRecord(label, text, split, est, None, None, "error", f"split must be in 0..{q.n - 1}")
    rec = QueryRecord(label, text, split, est, None, None, "done", estimates=estimates)
    splits = range(q.n) if getattr(args, "all_plans", False) else [split]
    rec.plans = {}
    for k in splits:
        try:
            rs = eng.execute(q, split=k, timeout_ms=args.timeout_ms)
        except QueryTimeout:
            if k == split:
                rec.status = "timeout"
            rec.plans[k] = float("inf")
            continue
        rec.plans[k] = rs.stats.total_ms
        if k == split:
            rec.measured_ms = rs.stats.total_ms
            rec.results = len(rs.aggregates) if q.aggregate is not None else len(rs)
            for ss in rs.stats.supersteps:
                for ph, v in ss.ms.items():
                    rec.phases[ph] = rec.phases.get(ph, 0.0) + v
            rec.phases["join"] = rs.stats.join_ms
            rec.phases["aggregate"] = rs.stats.aggregate_ms
    if len(rec.plans) == 1:
        rec.plans = None
    return rec


# -- commands -----------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = GenConfig(persons=args.persons, degree_model=DegreeModel(args.degree_model), dynamic=args.dynamic,
                    seed=args.seed, posts_per_person=args.posts_per_person,
                    comments_per_person=args.comments_per_person, forums_per_person=args.forums_per_person,
                    members_per_forum=args.members_per_forum, likes_per_person=args.likes_per_person,
                    interests_per_person=args.interests_per_person)
    t0 = time.perf_counter()
    g = gen_graph(cfg)
    with open(args.out, "w") as fh:
        dump_graph(g, fh)
    log.info("wrote %d vertices, %d edges to %s in %.1fs", g.num_vertices, g.num_edges, args.out,
             time.perf_counter() - t0)
    if args.queries:
        workload = {}
        for t in TEMPLATES:
            if t == "Q8" and not cfg.dynamic:
                continue
            workload[t] = gen_queries(g, t, args.per_template, seed=args.seed, aggregate=args.aggregate,
                                      dynamic=cfg.dynamic)
        write_workload(workload, args.queries, {"graph": os.path.basename(args.out), "graph_hash": g.content_hash(),
                                                "generator": cfg.to_json(), "aggregate": args.aggregate})
        log.info("wrote %d templates x %d queries to %s", len(workload), args.per_template, args.queries)
    print(json.dumps({"vertices": g.num_vertices, "edges": g.num_edges, "hash": g.content_hash()}))
    return EXIT_OK


def cmd_load(args) -> int:
    g = _load(args.graph)
    s = g.schema
    info = {
        "vertices": g.num_vertices, "edges": g.num_edges, "hash": g.content_hash(), "static": is_static(g),
        "lifespan": g.lifespan().to_json(),
        "vertex_types": {t: int((g.v_type == c).sum()) for t, c in s.vtype_codes.items()},
        "edge_types": {t: int((g.e_type == c).sum()) for t, c in s.etype_codes.items()},
    }
    print(json.dumps(info, indent=1))
    return EXIT_OK


def cmd_stats(args) -> int:
    g = _load(args.graph)
    t0 = time.perf_counter()
    st = build_stats(g, theta=args.theta, max_clusters=args.max_clusters)
    path = _stats_path(args)
    with open(path, "w") as fh:
        st.dump(fh)
    print(json.dumps({"file": str(path), "histograms": len(st.trees), "tiles": sum(len(t.tiles) for t in
                      st.trees.values()), "bytes": path.stat().st_size,
                      "seconds": round(time.perf_counter() - t0, 3)}))
    return EXIT_OK


def cmd_plan(args) -> int:
    g = _load(args.graph)
    st = _load_stats(args, g)
    tm = _time_model(args)
    for label, text in _queries(args):
        q = parse(text)
        validate(q, g.schema)
        t0 = time.perf_counter()
        plan, costs = select_plan(q, st, tm, args.basic_estimates)
        ms = (time.perf_counter() - t0) * 1e3
        if args.explain:
            print(f"# {label}: {q}")
            print(explain(costs))
            print(f"chosen split {plan.split} (planning {ms:.2f} ms)\n")
        elif args.all:
            print(json.dumps({"label": label, "chosen": plan.split, "plans": [
                {"split": c.plan.split, "estimated_ms": round(c.total, 3)} for c in costs]}))
        else:
            print(json.dumps({"label": label, "split": plan.split,
                              "estimated_ms": round(min(c.total for c in costs), 3)}))
    return EXIT_OK


def cmd_query(args) -> int:
    g = _load(args.graph)
    items = _queries(args)
    stats = None if args.no_cost_model or args.split is not None else _load_stats(args, g)
    tm = _time_model(args)
    status = EXIT_OK
    with _engine(args, g) as eng:
        for label, text in items:
            q = parse(text)
            validate(q, g.schema)
            split = args.split
            if split is None:
                split = select_plan(q, stats, tm, args.basic_estimates)[0].split if stats is not None else q.n - 1
            try:
                rs = eng.execute(q, split=split, timeout_ms=args.timeout_ms)
            except QueryTimeout as exc:
                print(json.dumps({"label": label, "status": "timeout", "error": str(exc)}), file=sys.stderr)
                status = EXIT_TIMEOUT
                continue
            for line in rs.iter_json():
                sys.stdout.write(line + "\n")
            if args.report:
                print(json.dumps({"label": label, "split": split, "stats": rs.stats.to_dict()}), file=sys.stderr)
    return status


def _config(args) -> dict[str, Any]:
    keys = ("graph", "query", "workers", "partitions_per_type", "seed", "timeout_ms", "split", "no_cost_model",
            "all_plans", "coefficients", "theta", "basic_estimates")
    cfg = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    cfg["backend"] = BACKEND
    cfg["version"] = __version__
    return cfg


def cmd_bench(args) -> int:
    g = _load(args.graph)
    stats = None if args.no_cost_model or args.split is not None else _load_stats(args, g)
    tm = _time_model(args)
    report = RunReport(_config(args))
    with _engine(args, g) as eng:
        for label, text in _queries(args):
            rec = _run_one(eng, g, label, text, args, stats, tm)
            report.queries.append(rec)
            log.info("%s split=%s %s %.1f ms results=%s", label, rec.split, rec.status,
                     rec.measured_ms or -1, rec.results)
    out = report.to_json()
    if args.report:
        Path(args.report).write_text(json.dumps(out, indent=1))
    print(json.dumps(out["summary"], indent=1))
    return EXIT_TIMEOUT if any(q.status == "timeout" for q in report.queries) else EXIT_OK


def cmd_calibrate(args) -> int:
    g = _load(args.graph)
    samples = []
    with _engine(args, g) as eng:
        for _, text in _queries(args):
            q = parse(text)
            validate(q, g.schema)
            for k in range(q.n):
                for _ in range(args.repeat):
                    rs = eng.execute(q, split=k, timeout_ms=args.timeout_ms)
                    samples.extend(samples_from_stats(rs.stats))
    tm = calibrate(samples)
    with open(args.out, "w") as fh:
        tm.dump(fh)
    print(json.dumps({"file": args.out, "samples": len(samples), "r2": tm.r2}, indent=1))
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------------


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--partitions-per-type", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="partitioner seed")
    p.add_argument("--timeout-ms", type=float, default=DEFAULT_TIMEOUT_MS)


def _planner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stats", help="statistics file (default: GRAPH.stats.json)")
    p.add_argument("--coefficients", help="time-model coefficients file")
    p.add_argument("--theta", type=float, default=None, help="tile variance threshold when building statistics")
    p.add_argument("--force", action="store_true", help="use statistics built for another graph")
    p.add_argument("--basic-estimates", action="store_true",
                   help="plain count recurrence with min/max clause combination")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tempograph", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="write a synthetic graph and optionally a query workload")
    p.add_argument("--persons", type=int, default=1000)
    p.add_argument("--degree-model", choices=[m.value for m in DegreeModel], default="facebook")
    p.add_argument("--dynamic", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--posts-per-person", type=float, default=100.0)
    p.add_argument("--comments-per-person", type=float, default=400.0)
    p.add_argument("--forums-per-person", type=float, default=9.0)
    p.add_argument("--members-per-forum", type=float, default=40.0)
    p.add_argument("--likes-per-person", type=float, default=20.0)
    p.add_argument("--interests-per-person", type=float, default=23.0)
    p.add_argument("--out", required=True)
    p.add_argument("--queries", help="directory for the query workload")
    p.add_argument("--per-template", type=int, default=100)
    p.add_argument("--aggregate", action="store_true", help="wrap each query in a COUNT aggregate")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("load", help="validate a graph file and print a summary")
    p.add_argument("graph")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("stats", help="build histogram statistics next to the graph")
    p.add_argument("graph")
    p.add_argument("--stats")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--max-clusters", type=int, default=16)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plan", help="estimate every split point and pick one")
    p.add_argument("graph")
    p.add_argument("query", help="query text, a file of queries or a workload directory")
    p.add_argument("--all", action="store_true", help="print every plan's estimate")
    p.add_argument("--explain", action="store_true", help="print the per-superstep estimate table")
    _planner_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("query", help="run queries and stream results as JSON lines")
    p.add_argument("graph")
    p.add_argument("query")
    p.add_argument("--split", type=int, default=None, help="force the split vertex (0-based)")
    p.add_argument("--no-cost-model", action="store_true", help="run left to right without planning")
    p.add_argument("--report", action="store_true", help="print execution statistics to stderr")
    _engine_flags(p)
    _planner_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run a workload and report latencies (counts only)")
    p.add_argument("graph")
    p.add_argument("query")
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--no-cost-model", action="store_true")
    p.add_argument("--all-plans", action="store_true", help="also time every other split point")
    p.add_argument("--report", help="write the full run report here")
    _engine_flags(p)
    _planner_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="fit time-model coefficients from measured runs")
    p.add_argument("graph")
    p.add_argument("query")
    p.add_argument("--out", required=True)
    p.add_argument("--repeat", type=int, default=1)
    _engine_flags(p)
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (GraphError, QueryError, StatsError, PlanError, WorkloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StaleStats as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STALE
    except QueryTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
