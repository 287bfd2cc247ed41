import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import chain_query, fan_in_chain
from randgraph import random_graph, random_query
from tempograph.engine import Engine, QueryTimeout, execute, segments
from tempograph.graph import load_graph
from tempograph.intervals import Interval
from tempograph.oracle import brute_force
from tempograph.partition import partition
from tempograph.query import parse
from tempograph.samples import QUERIES, community_graph


@pytest.mark.parametrize("label", sorted(QUERIES))
@pytest.mark.parametrize("dynamic", [True, False])
def test_sample_queries_match_oracle_at_every_split(label, dynamic):
    g = community_graph(dynamic=dynamic)
    q = parse(QUERIES[label])
    expected = brute_force(g, q).canonical()
    with Engine(g) as eng:
        for k in range(q.n):
            assert eng.execute(q, split=k).canonical() == expected


def test_count_aggregate_example():
    rs = execute(community_graph(), parse(QUERIES["count-bob-follows"]))
    assert rs.canonical() == [(2, Interval(10, 30), 1), (2, Interval(50, 100), 1)]


def test_segments_cover_query():
    q = parse('{*} -[*]-> {*} -[*]-> {*} -[*]-> {*}')
    assert [s.side for s in segments(q, 3)] == ["left"]
    assert [s.side for s in segments(q, 0)] == ["right"]
    left, right = segments(q, 2)
    assert (left.hops, right.hops) == (2, 1)
    with pytest.raises(ValueError):
        segments(q, 4)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 1_000_000), st.booleans())
def test_engine_matches_oracle_for_every_split(seed, dynamic):
    g = random_graph(seed, dynamic=dynamic)
    q = random_query(seed + 1)
    expected = brute_force(g, q).canonical()
    with Engine(g) as eng:
        for k in range(q.n):
            assert eng.execute(q, split=k).canonical() == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1_000_000), st.integers(1, 4), st.integers(1, 3))
def test_results_independent_of_workers_and_partitions(seed, workers, per_type):
    g = random_graph(seed, nv=25, ne=70)
    q = random_query(seed)
    base = execute(g, q).canonical()
    asg = partition(g, workers=workers, per_type=per_type, seed=seed)
    with Engine(g, asg, workers=workers) as eng:
        for k in range(q.n):
            assert eng.execute(q, split=k).canonical() == base


@pytest.mark.parametrize("h", range(3, 9))
def test_result_tree_bound_on_fan_in_chains(h):
    g = fan_in_chain(h)
    q = chain_query(h)
    with Engine(g) as eng:
        rs = eng.execute(q, split=q.n - 1)
        n = len(rs)
        assert n == 2 ** h
        (tree,) = eng.last_trees.values()
        assert tree.node_count() <= 2 * n - 1
        assert len(tree.paths()) == n
        # split plans keep one tree per segment; each obeys the bound for its own paths
        for k in range(q.n - 1):
            assert len(eng.execute(q, split=k)) == n
            for tree in eng.last_trees.values():
                assert tree.node_count() <= 2 * len(tree.paths()) - 1


def test_expand_shares_prefixes():
    # two paths through one middle vertex: the tree stores the shared node once
    recs = [{"kind": "schema", "vertex_types": {"N": []}, "edge_types": {"e": []}, "multi_valued": []}]
    for v in range(4):
        recs.append({"kind": "vertex", "vid": v, "type": "N", "lifespan": [0, 10]})
    for eid, s, d in [(10, 0, 1), (11, 1, 2), (12, 1, 3)]:
        recs.append({"kind": "edge", "eid": eid, "type": "e", "src": s, "dst": d, "lifespan": [0, 10]})
    g = load_graph(json.dumps(r) for r in recs)
    q = parse('{*} -[*]-> {*} -[*]-> {*}')
    with Engine(g) as eng:
        rs = eng.execute(q, split=0)
        assert sorted(p for p, _ in rs.paths) == [(0, 10, 1, 11, 2), (0, 10, 1, 12, 3)]


def test_split_join_respects_first_hop_validity():
    g = community_graph()
    q = parse(QUERIES["followed-after-don"])
    for k in range(q.n):
        assert execute(g, q, split=k).canonical() == [((1, 102, 2, 103, 4), Interval(30, 100))]


def test_timeout_raises():
    g = random_graph(5, nv=60, ne=400)
    q = parse("{*} -[*]- {*} -[*]- {*} -[*]- {*} -[*]- {*}")
    with pytest.raises(QueryTimeout):
        execute(g, q, timeout_ms=1e-3)


def test_stats_record_counts():
    g = community_graph()
    rs = execute(g, parse(QUERIES["liked-before-don"]), split=2)
    ss = rs.stats.supersteps
    assert [s.index for s in ss] == list(range(1, len(ss) + 1))
    assert ss[0].active >= ss[0].matched > 0
    d = rs.stats.to_dict()
    assert d["split"] == 2 and set(d["supersteps"][0]["ms"]) >= {"init", "compute", "scatter"}
