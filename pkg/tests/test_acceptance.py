"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import os
import time

import numpy as np
import pytest

from fixtures import COUNTRY_THETA, PLAN_TABLES, chain_query, check_time_warp, country_graph, fan_in_chain
from tempograph.engine import Engine, QueryTimeout
from tempograph.generator import TEMPLATES, GenConfig, gen_graph, gen_queries
from tempograph.intervals import Interval
from tempograph.oracle import brute_force
from tempograph.partition import partition
from tempograph.planner import (QueryPlan, TimeModel, calibrate, counts_from_table, estimate_time,
                                samples_from_stats, select_plan)
from tempograph.query import parse
from tempograph.samples import QUERIES, community_graph
from tempograph.statistics import (build_histogram, build_stats, build_tree, cluster_values, linear_lookup,
                                   lookup_H, tile, tile_variance)

SMALL = dict(forums_per_person=0.5, members_per_forum=8, posts_per_person=5, comments_per_person=10,
             likes_per_person=4, interests_per_person=4)
DESK = dict(forums_per_person=1, members_per_forum=20, posts_per_person=10, comments_per_person=40,
            likes_per_person=10, interests_per_person=10)
PER_TEMPLATE = 100
CALIBRATION_PER_TEMPLATE = 10
TIMEOUT_MS = 600_000


def test_engine_matches_oracle_on_random_graphs(verdict):
    runs = mismatches = 0
    sizes = []
    t0 = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        dynamic = bool(seed % 2)
        g = gen_graph(GenConfig(persons=int(rng.integers(10, 110)), dynamic=dynamic, seed=seed, **SMALL))
        sizes.append(g.num_vertices)
        with Engine(g) as eng:
            for t in TEMPLATES:
                if t == "Q8" and not dynamic:
                    continue
                texts = gen_queries(g, t, 2, seed=seed, dynamic=dynamic) + \
                    gen_queries(g, t, 1, seed=seed + 1000, aggregate=True, dynamic=dynamic)
                for text in texts:
                    q = parse(text)
                    expected = brute_force(g, q).canonical()
                    for k in range(q.n):
                        runs += 1
                        mismatches += eng.execute(q, split=k).canonical() != expected
    ok = mismatches == 0 and min(sizes) >= 100 and max(sizes) <= 2000
    assert verdict(1, "oracle equivalence", ok,
                   f"{runs} executions over 100 graphs of {min(sizes)}-{max(sizes)} vertices, "
                   f"{mismatches} mismatches, {time.perf_counter() - t0:.0f}s")


def test_cost_table_recomputation(verdict):
    tm = TimeModel()
    steps = {k: estimate_time(QueryPlan(0, []), [counts_from_table(v)], tm).per_step
             for k, v in PLAN_TABLES.items()}
    got = steps["left-to-right"] + steps["right-to-left"]
    want = [531, 132, 4147, 35]
    close = all(abs(g - w) <= 0.10 * w for g, w in zip(got, want))
    picks_first = sum(steps["left-to-right"]) < sum(steps["right-to-left"])
    assert verdict(2, "cost table recomputation", close and picks_first,
                   "per-step ms " + ", ".join(f"{g:.1f}" for g in got) +
                   f"; cheaper plan is {'left-to-right' if picks_first else 'right-to-left'}")


@pytest.fixture(scope="module")
def desk():
    g = gen_graph(GenConfig(persons=10_000, dynamic=True, seed=7, **DESK))
    return g, build_stats(g)


@pytest.fixture(scope="module")
def desk_run(desk):
    """Calibrate on one workload, then time every plan of a separate one."""
    g, stats = desk
    rows, timeouts = [], 0
    with Engine(g) as eng:
        samples = []
        for t in TEMPLATES:
            for text in gen_queries(g, t, CALIBRATION_PER_TEMPLATE, seed=99, dynamic=True):
                q = parse(text)
                for k in range(q.n):
                    samples += samples_from_stats(eng.execute(q, split=k, timeout_ms=TIMEOUT_MS).stats)
        tm = calibrate(samples)
        for t in TEMPLATES:
            for text in gen_queries(g, t, PER_TEMPLATE, seed=1, dynamic=True):
                q = parse(text)
                plan, costs = select_plan(q, stats, tm)
                measured = {}
                for k in range(q.n):
                    try:
                        measured[k] = eng.execute(q, split=k, timeout_ms=TIMEOUT_MS).stats.total_ms
                    except QueryTimeout:
                        measured[k] = float("inf")
                        timeouts += 1
                # plans close to the best are timed twice more and keep their fastest run
                best = min(measured.values())
                for k, ms in measured.items():
                    if ms <= 1.5 * best:
                        measured[k] = min([ms] + [eng.execute(q, split=k, timeout_ms=TIMEOUT_MS).stats.total_ms
                                                  for _ in range(2)])
                rows.append((t, plan.split, {c.plan.split: c.total for c in costs}, measured))
    return rows, timeouts, tm


def test_plan_selection_quality(desk_run, verdict):
    rows, _, _ = desk_run
    top2 = 0
    overhead: dict[str, list[float]] = {}
    for t, chosen, _, measured in rows:
        order = sorted(measured, key=measured.get)
        top2 += chosen in order[:2]
        overhead.setdefault(t, []).append(measured[chosen] / measured[order[0]] - 1)
    rate = top2 / len(rows)
    p75 = {t: float(np.percentile(v, 75)) for t, v in overhead.items()}
    worst = max(p75, key=p75.get)
    ok = rate >= 0.90 and p75[worst] <= 0.10
    assert verdict(3, "plan selection", ok,
                   f"optimal or second-best for {rate:.1%} of {len(rows)} queries; p75 overhead per template " +
                   " ".join(f"{t}={v:.1%}" for t, v in sorted(p75.items())))


def test_estimate_correlation(desk_run, verdict):
    rows, _, tm = desk_run
    chosen = np.array([(e[k], m[k]) for _, k, e, m in rows])
    every = np.array([(e[k], m[k]) for _, _, e, m in rows for k in m if np.isfinite(m[k])])
    r_chosen = float(np.corrcoef(chosen.T)[0, 1])
    r_all = float(np.corrcoef(every.T)[0, 1])
    assert verdict(4, "estimate correlation", min(r_chosen, r_all) >= 0.7,
                   f"Pearson r = {r_chosen:.3f} over {len(chosen)} chosen plans, {r_all:.3f} over all "
                   f"{len(every)} timed plans (fit R2 " +
                   " ".join(f"{k}={v:.2f}" for k, v in sorted(tm.r2.items())) + ")")


def test_statistics_invariants(verdict):
    g = gen_graph(GenConfig(persons=1000, seed=5, dynamic=True, **SMALL))
    stats = build_stats(g)
    rng = np.random.default_rng(0)
    # (a) every tile of every histogram, at the default and at a few other thresholds
    tiles_checked = bad_var = 0
    hists = []
    for (kind, tname, key), tree in stats.trees.items():
        hists.append(tree.hist)
        for theta in (tree.theta, 0.0, 1.0, 25.0):
            for t in (tree.tiles if theta == tree.theta else tile(tree.hist, theta)):
                tiles_checked += 1
                bad_var += tile_variance(tree.hist, t) > theta + 1e-9 * (1 + t.f ** 2)
    # (b) zero-threshold lookups reproduce bucket-aligned raw cells
    exact = [build_tree(h, tile(h, 0.0)) for h in hists]
    raw_bad = probes = 0
    while probes < 10_000:
        i = int(rng.integers(len(hists)))
        h, tree = hists[i], exact[i]
        r = int(rng.integers(h.shape[0]))
        if isinstance(h.members[r][0], bool):
            continue
        probes += 1
        c0 = int(rng.integers(h.shape[1]))
        c1 = int(rng.integers(c0 + 1, h.shape[1] + 1))
        dur = np.diff(h.edges[c0:c1 + 1])
        want = float((h.f[r, c0:c1] * dur).sum() / dur.sum()) / len(h.members[r])
        got = lookup_H(tree, h.members[r][0], (int(h.edges[c0]), int(h.edges[c1]))).f
        raw_bad += abs(got - want) > 1e-9 * (1 + want)
    # (c) tree lookups match a linear scan of the tiles
    trees = list(stats.trees.values())
    scan_bad = 0
    for _ in range(10_000):
        tree = trees[int(rng.integers(len(trees)))]
        h = tree.hist
        lo, hi = int(h.edges[0]), int(h.edges[-1])
        ts = int(rng.integers(lo - 5, hi))
        te = int(rng.integers(ts + 1, hi + 6))
        members = h.members[int(rng.integers(h.shape[0]))] if h.shape[0] else [None]
        value = members[0] if rng.random() < 0.9 else "no such value"
        op = "!=" if rng.random() < 0.2 else "=="
        a, b = lookup_H(tree, value, (ts, te), op), linear_lookup(tree, value, (ts, te), op)
        scan_bad += abs(a.f - b.f) > 1e-9 * (1 + abs(b.f))
    ok = bad_var == 0 and raw_bad == 0 and scan_bad == 0
    assert verdict(5, "statistics invariants", ok,
                   f"{tiles_checked} tiles over variance bound: {bad_var}; raw-cell probes off: {raw_bad}/10000; "
                   f"tree vs scan probes off: {scan_bad}/10000")


def test_country_tiling_example(verdict):
    h = build_histogram(country_graph(), "vertex", "Person", "Country", 10)
    h, vmap = cluster_values(h)
    tree = build_tree(h, tile(h, COUNTRY_THETA), COUNTRY_THETA, vmap)
    got = sorted((tuple(h.values[t.rows[0]:t.rows[1]]), t.ts, t.te, t.f) for t in tree.tiles)
    want = sorted([(("India",), 0, 40, 10.0), (("India", "UK"), 40, 50, 14.0), (("UK",), 0, 40, 20.5),
                   (("US",), 0, 50, 5.0)])
    assert verdict(6, "histogram tiling example", got == want,
                   "tiles " + "; ".join(f"{'+'.join(v)} [{a},{b}) f={f:g}" for v, a, b, f in got))


def test_time_warp_properties(verdict):
    rng = np.random.default_rng(0)
    failures = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 12))
        starts = rng.integers(0, 60, n)
        items = [((int(s), int(s + rng.integers(1, 20))), i) for i, s in enumerate(starts)]
        try:
            check_time_warp(items)
        except AssertionError:
            failures += 1
    assert verdict(7, "time warp properties", failures == 0, f"{failures} of 10000 random interval sets failed")


def test_result_tree_bound(verdict):
    worst = []
    ok = True
    for h in range(3, 9):
        g, q = fan_in_chain(h), chain_query(h)
        with Engine(g) as eng:
            rs = eng.execute(q, split=q.n - 1)
            (tree,) = eng.last_trees.values()
            n = len(rs)
            ok &= n == 2 ** h and len(tree.paths()) == n and tree.node_count() <= 2 * n - 1
            worst.append(f"h={h}: {tree.node_count()}/{2 * n - 1}")
    assert verdict(8, "result tree bound", ok, "nodes/bound " + ", ".join(worst))


def test_count_aggregate_example(verdict):
    g = community_graph()
    q = parse(QUERIES["count-bob-follows"])
    oracle = brute_force(g, q).canonical()
    with Engine(g) as eng:
        got = {tuple(eng.execute(q, split=k).canonical()) for k in range(q.n)}
    want = [(2, Interval(10, 30), 1), (2, Interval(50, 100), 1)]
    ok = oracle == want and got == {tuple(want)}
    assert verdict(9, "count aggregate example", ok,
                   "groups " + ", ".join(f"vid {v} {iv} -> {c}" for v, iv, c in oracle))


def _batch_seconds(g, stats, queries, workers):
    asg = partition(g, workers=workers, per_type=4, seed=0)
    with Engine(g, asg, workers=workers) as eng:
        t0 = time.perf_counter()
        for q in queries:
            eng.execute(q, split=select_plan(q, stats)[0].split, timeout_ms=TIMEOUT_MS)
        return time.perf_counter() - t0


def test_thread_scaling(desk, verdict):
    g, stats = desk
    queries = [parse(t) for tmpl in ("Q1", "Q5", "Q6") for t in gen_queries(g, tmpl, 10, seed=3, dynamic=True)]
    one = _batch_seconds(g, stats, queries, 1)
    four = _batch_seconds(g, stats, queries, 4)
    speedup = one / four
    ok = g.num_edges >= 1_000_000 and speedup >= 1.5
    verdict(10, "thread scaling", ok,
            f"{g.num_edges} edges, {len(queries)} queries: 1 thread {one:.2f}s, 4 threads {four:.2f}s, "
            f"speedup {speedup:.2f} on {os.cpu_count()} CPU(s)")
    if not ok and (os.cpu_count() or 1) < 4:
        pytest.xfail(f"needs at least 4 CPUs, found {os.cpu_count()}")
    assert ok


def test_workload_completes(desk_run, verdict):
    rows, timeouts, _ = desk_run
    runs = sum(len(m) for _, _, _, m in rows)
    assert verdict(11, "workload completion", timeouts == 0,
                   f"{len(rows)} queries, {runs - timeouts}/{runs} plan executions finished within "
                   f"{TIMEOUT_MS / 1000:.0f}s")
