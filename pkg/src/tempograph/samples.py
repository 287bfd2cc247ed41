"""A small hand-built community graph used by tests, docs and the CLI demo.

Persons Alice, Bob, Cleo, Don, Eve and Fay plus two posts. Cleo lives in the
UK during [0,40) and in the US afterwards; she only starts following Alice at
50, so the "UK person follows someone who follows a hiker" path exists when
time is ignored but not once Cleo's country history is taken into account.
"""
from __future__ import annotations

from .graph import GraphSchema, TemporalGraph, load_graph

SCHEMA = {
    "kind": "schema",
    "vertex_types": {"Person": ["Name", "Country", "Tag"], "Post": ["Tag"]},
    "edge_types": {"Follows": [], "Likes": [], "Created": []},
    "multi_valued": ["Tag"],
}

PEOPLE = {
    1: ("Alice", (0, 100)),
    2: ("Bob", (5, 100)),
    3: ("Cleo", (0, 100)),
    4: ("Don", (0, 100)),
    5: ("Eve", (20, 100)),
    6: ("Fay", (0, 100)),
}
POSTS = {7: ("Vacation", (15, 100)), 8: ("News", (40, 100))}

EDGES = [
    # eid, type, src, dst, lifespan
    (101, "Follows", 3, 1, (50, 100)),  # Cleo -> Alice
    (102, "Follows", 1, 2, (30, 100)),  # Alice -> Bob
    (103, "Follows", 2, 4, (10, 30)),   # Bob -> Don
    (104, "Follows", 2, 6, (50, 100)),  # Bob -> Fay
    (105, "Follows", 5, 3, (20, 60)),   # Eve -> Cleo
    (201, "Likes", 2, 7, (20, 100)),    # Bob -> PicPost
    (202, "Likes", 4, 7, (30, 100)),    # Don -> PicPost
    (203, "Likes", 5, 7, (25, 100)),    # Eve -> PicPost
    (204, "Likes", 1, 8, (45, 100)),    # Alice -> TextPost
    (301, "Created", 6, 7, (15, 100)),  # Fay -> PicPost
    (302, "Created", 4, 8, (40, 100)),  # Don -> TextPost
]

# Queries over this graph, keyed by a short label.
QUERIES = {
    "uk-follows-hiker": (
        '{Type=="Person" && Country=="UK"} -[Type=="Follows"]-> {Type=="Person"} '
        '-[Type=="Follows"]-> {Type=="Person" && Tag CONTAINS "Hiking"}'
    ),
    "liked-before-don": (
        '{Type=="Person" && Tag CONTAINS "Hiking"} -[Type=="Likes"]-> '
        '{Type=="Post" && Tag CONTAINS "Vacation"} ETR(sbefore) '
        '<-[Type=="Likes"]- {Type=="Person" && Name=="Don"}'
    ),
    "followed-after-don": (
        '{Type=="Person"} -[Type=="Follows"]-> {Type=="Person"} ETR(after) '
        '-[Type=="Follows"]-> {Type=="Person" && Name=="Don"}'
    ),
    "count-bob-follows": (
        '{Type=="Person" && Name=="Bob"} -[Type=="Follows"]-> {Type=="Person"} AGG count(*)'
    ),
}


def community_records(dynamic: bool = True, cleo_props: bool = True) -> list[dict]:
    """Ingest records; ``dynamic=False`` gives Cleo a single UK record."""
    recs: list[dict] = [SCHEMA]
    for vid, (name, span) in PEOPLE.items():
        recs.append({"kind": "vertex", "vid": vid, "type": "Person", "lifespan": list(span)})
    for vid, (_, span) in POSTS.items():
        recs.append({"kind": "vertex", "vid": vid, "type": "Post", "lifespan": list(span)})
    for eid, etype, src, dst, span in EDGES:
        recs.append({"kind": "edge", "eid": eid, "type": etype, "src": src, "dst": dst, "lifespan": list(span)})

    def prop(owner, key, value, span):
        recs.append({"kind": "vprop", "owner": owner, "key": key, "value": value, "lifespan": list(span)})

    for vid, (name, span) in PEOPLE.items():
        if vid == 3 and not cleo_props:
            continue
        prop(vid, "Name", name, span)
    prop(2, "Tag", "Hiking", PEOPLE[2][1])
    prop(2, "Tag", "Music", PEOPLE[2][1])
    prop(5, "Tag", "Music", PEOPLE[5][1])
    prop(5, "Country", "UK", PEOPLE[5][1])
    prop(1, "Country", "IN", PEOPLE[1][1])
    if cleo_props:
        if dynamic:
            prop(3, "Country", "UK", (0, 40))
            prop(3, "Country", "US", (40, 100))
        else:
            prop(3, "Country", "UK", (0, 100))
    for vid, (tag, span) in POSTS.items():
        prop(vid, "Tag", tag, span)
    return recs


def community_graph(dynamic: bool = True, cleo_props: bool = True) -> TemporalGraph:
    import json
    return load_graph(json.dumps(r) for r in community_records(dynamic, cleo_props))


def community_schema() -> GraphSchema:
    return GraphSchema.from_json(SCHEMA)
