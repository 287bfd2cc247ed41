import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgraph import SCHEMA, random_query
from tempograph.graph import GraphSchema
from tempograph.intervals import INFINITY, Cmp, Interval
from tempograph.query import BoolExpr, Direction, PathQuery, PropClause, QueryError, parse, validate
from tempograph.samples import QUERIES, community_schema

SCH = GraphSchema.from_json(SCHEMA)


def test_parse_example():
    q = parse('{Type=="Person" && Country=="UK"} -[Type=="Follows"]-> {*} ETR(>>) '
              '<-[Type=="Likes"]- {LIFESPAN ov [3,INF] && Type=="Post"} AGG count(*)')
    assert q.n == 3 and q.hops == 2
    assert q.vertices[0].bound_type == "Person"
    assert q.vertices[1].is_wildcard
    assert q.etr == (None, Cmp.FULLY_AFTER, None)
    assert [e.direction for e in q.edges] == [Direction.OUT, Direction.IN]
    assert q.vertices[2].time.interval == Interval(3, INFINITY)
    assert q.aggregate.op == "count" and q.aggregate.key is None


def test_bool_chain_reads_right_associative():
    q = parse('{a=="1" && b=="2" || c=="3"} -[*]- {*}')
    e = q.vertices[0].expr
    assert isinstance(e, BoolExpr) and e.op == "AND"
    assert e.right.op == "OR"
    assert q.vertices[0].bound_type is None


@pytest.mark.parametrize("text", [
    "{*}",
    '{Type=="A"} -[*]-> ',
    '{Type=="A"} -[*]-> {*} ETR(sbefore)',
    '{Type=="A" && LIFESPAN ov [1,2]} -[*]-> {*}',
    '{Type=="A"} -[*]-> {LIFESPAN ov [5,2]}',
    '{Type~"A"} -[*]-> {*}',
    '{Type=="A"} -[*]-> {*} AGG min(*)',
    '{Type=="A"} -[*]-> {*} AGG sum(x)',
    '{Type=="A"} -[*]-> {*} ETR(during)',
])
def test_parse_errors(text):
    with pytest.raises(QueryError):
        parse(text)


@pytest.mark.parametrize("text,match", [
    ('{Type=="Z"} -[*]-> {*}', "unknown vertex type"),
    ('{Type=="A" && size=="1"} -[*]-> {*}', "unknown key"),
    ('{Type CONTAINS "A"} -[*]-> {*}', "Type only supports"),
    ('{*} -[Type=="q"]-> {*}', "unknown edge type"),
    ('{*} -[*]-> {Type=="A"} AGG max(size)', "aggregate key"),
])
def test_validate_errors(text, match):
    with pytest.raises(QueryError, match=match):
        validate(parse(text), SCH)


def test_validate_attaches_key_codes():
    q = parse('{Type=="A" && color=="red"} -[*]-> {*}', SCH)
    clause = q.vertices[0].expr.right
    assert isinstance(clause, PropClause) and clause.key_code == SCH.key_codes["color"]


@pytest.mark.parametrize("label", sorted(QUERIES))
def test_sample_queries_validate(label):
    validate(parse(QUERIES[label]), community_schema())


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100_000))
def test_text_round_trip(seed):
    q = random_query(seed)
    text = str(q)
    again = parse(text)
    assert again == q
    assert str(again) == text


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_dict_round_trip(seed):
    q = random_query(seed)
    assert PathQuery.from_dict(q.to_dict()) == q


def test_symbol_and_word_comparators_agree():
    a = parse('{LIFESPAN << [0,5]} -[*]-> {*} ETR(≺) -[*]-> {*}')
    b = parse('{LIFESPAN before [0,5]} -[*]-> {*} ETR(sbefore) -[*]-> {*}')
    assert a == b
