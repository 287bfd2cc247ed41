import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgraph import random_query, random_records
from tempograph.graph import load_graph
from tempograph.intervals import Interval
from tempograph.oracle import OracleGuardError, brute_force
from tempograph.query import parse
from tempograph.samples import QUERIES, community_graph


def run(label, dynamic=True):
    return brute_force(community_graph(dynamic=dynamic), parse(QUERIES[label])).canonical()


def test_property_history_breaks_path():
    # the UK record ends before the follow edge starts
    assert run("uk-follows-hiker") == []
    assert run("uk-follows-hiker", dynamic=False) == [((3, 101, 1, 102, 2), Interval(50, 100))]


def test_edge_temporal_relation_starts_before():
    assert run("liked-before-don") == [((2, 201, 7, 202, 4), Interval(20, 100))]


def test_edge_temporal_relation_after():
    assert run("followed-after-don") == [((1, 102, 2, 103, 4), Interval(30, 100))]


def test_count_aggregate_per_interval():
    assert run("count-bob-follows") == [(2, Interval(10, 30), 1), (2, Interval(50, 100), 1)]


def test_count_merges_overlapping_paths():
    g = community_graph()
    rows = brute_force(g, parse('{Type=="Post" && Tag CONTAINS "Vacation"} <-[Type=="Likes"]- {*} '
                                'AGG count(*)')).canonical()
    assert rows == [(7, Interval(20, 25), 1), (7, Interval(25, 30), 2), (7, Interval(30, 100), 3)]


def test_min_max_aggregate_over_last_vertex():
    g = community_graph()
    q = '{Type=="Person" && Name=="Bob"} -[Type=="Follows"]-> {Type=="Person"} AGG max(Name)'
    rows = brute_force(g, parse(q)).canonical()
    assert rows == [(2, Interval(10, 30), "Don"), (2, Interval(50, 100), "Fay")]


def test_not_equal_requires_an_active_value():
    g = community_graph()
    rows = brute_force(g, parse('{Type=="Person" && Country!="UK"} -[Type=="Follows"]-> {*}')).canonical()
    # Alice (IN) and Cleo once she moves to the US; Bob has no country and is excluded
    assert [p[0][0] for p in rows] == [1, 3]


def test_guard_trips_on_large_searches():
    g = load_graph(json.dumps(r) for r in random_records(3, nv=30, ne=200))
    with pytest.raises(OracleGuardError):
        brute_force(g, parse("{*} -[*]- {*} -[*]- {*} -[*]- {*}"), guard=50)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_input_order_invariance(gseed, qseed):
    recs = random_records(gseed)
    rng = np.random.default_rng(gseed)
    body = recs[1:]
    shuffled = [recs[0]] + [body[i] for i in rng.permutation(len(body))]
    a = load_graph(json.dumps(r) for r in recs)
    b = load_graph(json.dumps(r) for r in shuffled)
    q = random_query(qseed)
    assert brute_force(a, q).canonical() == brute_force(b, q).canonical()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_results_are_sets_with_valid_intervals(seed):
    g = load_graph(json.dumps(r) for r in random_records(seed))
    q = random_query(seed, aggregate=False)
    paths = brute_force(g, q).canonical()
    assert len(paths) == len(set(paths))
    for ids, iv in paths:
        assert len(ids) == 2 * q.n - 1
        assert iv.ts < iv.te
