import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgraph import random_records
from tempograph.graph import GraphError, dumps_graph, is_static, load_graph, properties_during
from tempograph.intervals import INFINITY, Interval
from tempograph.samples import community_graph, community_records

SCHEMA = {"kind": "schema", "vertex_types": {"P": ["name", "tag"]}, "edge_types": {"f": []},
          "multi_valued": ["tag"]}


def _load(recs):
    return load_graph(json.dumps(r) for r in recs)


def _base():
    return [SCHEMA,
            {"kind": "vertex", "vid": 1, "type": "P", "lifespan": [0, 10]},
            {"kind": "vertex", "vid": 2, "type": "P", "lifespan": [5, -1]}]


def test_load_small_graph():
    g = _load(_base() + [{"kind": "edge", "eid": 9, "type": "f", "src": 1, "dst": 2, "lifespan": [5, 10]}])
    assert g.num_vertices == 2 and g.num_edges == 1
    assert g.v_te[g.vertex_index(2)] == INFINITY
    assert g.lifespan() == Interval(0, INFINITY)


@pytest.mark.parametrize("extra,match", [
    ([{"kind": "vertex", "vid": 1, "type": "P", "lifespan": [0, 3]}], "duplicate vertex"),
    ([{"kind": "vertex", "vid": 3, "type": "Q", "lifespan": [0, 3]}], "unknown type"),
    ([{"kind": "vertex", "vid": 3, "type": "P", "lifespan": [4, 4]}], "empty"),
    ([{"kind": "edge", "eid": 9, "type": "f", "src": 1, "dst": 2, "lifespan": [0, 10]}], "referential"),
    ([{"kind": "edge", "eid": 9, "type": "f", "src": 1, "dst": 7, "lifespan": [5, 6]}], "sink"),
    ([{"kind": "vprop", "owner": 1, "key": "name", "value": "a", "lifespan": [0, 6]},
      {"kind": "vprop", "owner": 1, "key": "name", "value": "b", "lifespan": [5, 10]}], "overlap"),
    ([{"kind": "vprop", "owner": 1, "key": "name", "value": "a", "lifespan": [0, 11]}], "lifespan"),
    ([{"kind": "vprop", "owner": 1, "key": "color", "value": "a", "lifespan": [0, 5]}], "color"),
    ([{"kind": "thing"}], "unknown record kind"),
    ([{"kind": "vertex", "vid": 3, "type": "P"}], "lifespan"),
])
def test_load_rejects_bad_records(extra, match):
    with pytest.raises(GraphError, match=match):
        _load(_base() + extra)


def test_multi_valued_key_allows_overlap():
    g = _load(_base() + [
        {"kind": "vprop", "owner": 1, "key": "tag", "value": "a", "lifespan": [0, 6]},
        {"kind": "vprop", "owner": 1, "key": "tag", "value": "b", "lifespan": [2, 10]}])
    assert properties_during(g, 1, "tag", (0, 10)) == [("a", Interval(0, 6)), ("b", Interval(2, 10))]


def test_records_before_schema_and_garbage_lines():
    with pytest.raises(GraphError, match="before the schema"):
        load_graph([json.dumps({"kind": "vertex", "vid": 1, "type": "P", "lifespan": [0, 1]})])
    with pytest.raises(GraphError, match="malformed"):
        load_graph([json.dumps(SCHEMA), "{not json"])


def test_properties_during_clips_to_window():
    g = community_graph()
    assert properties_during(g, 3, "Country", (30, 60)) == [("UK", Interval(30, 40)), ("US", Interval(40, 60))]
    assert properties_during(g, 3, "Country", (50, 60)) == [("US", Interval(50, 60))]
    with pytest.raises(GraphError):
        properties_during(g, 7, "Country", (0, 10))


def test_static_and_dynamic_detection():
    assert not is_static(community_graph(dynamic=True))
    assert is_static(community_graph(dynamic=False))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_dump_load_round_trip(seed, dynamic):
    g = _load(random_records(seed, dynamic=dynamic))
    text = dumps_graph(g)
    h = load_graph(io.StringIO(text))
    assert h.content_hash() == g.content_hash()
    assert dumps_graph(h) == text


def test_hash_ignores_record_order():
    recs = community_records()
    a = _load(recs)
    b = _load([recs[0]] + list(reversed(recs[1:])))
    assert a.content_hash() == b.content_hash()
    c = _load(community_records(dynamic=False))
    assert c.content_hash() != a.content_hash()
