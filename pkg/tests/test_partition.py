import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgraph import random_graph
from tempograph.generator import GenConfig, gen_graph
from tempograph.partition import BALANCE, PartitionAssignment, edge_cut, partition


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 5))
def test_partitions_are_type_pure_and_balanced(seed, workers, per_type):
    g = random_graph(seed, nv=60, ne=200)
    asg = partition(g, workers=workers, per_type=per_type, seed=seed)
    assert asg.num_partitions == len(g.schema.vertex_types) * per_type
    for pid in range(asg.num_partitions):
        assert (g.v_type[asg.members(pid)] == asg.partition_type[pid]).all()
    for t in range(len(g.schema.vertex_types)):
        sizes = asg.sizes()[asg.partition_type == t]
        n = int(sizes.sum())
        assert sizes.max() - sizes.min() <= max(1, int(BALANCE * n / per_type))
    assert sorted(np.concatenate([asg.members(p) for p in range(asg.num_partitions)]).tolist()) == \
        list(range(g.num_vertices))
    # partitions are dealt round-robin
    assert asg.worker_of.tolist() == [p % workers for p in range(asg.num_partitions)]


def test_same_seed_same_assignment():
    g = random_graph(5, nv=80, ne=300)
    a = partition(g, workers=2, per_type=3, seed=7)
    b = partition(g, workers=2, per_type=3, seed=7)
    assert (a.partition_of == b.partition_of).all()


def test_cut_beats_random_balanced_assignment():
    g = gen_graph(GenConfig(persons=400, seed=3, forums_per_person=0.2, members_per_forum=5,
                            posts_per_person=1, comments_per_person=1, likes_per_person=1,
                            interests_per_person=1))
    asg = partition(g, workers=4, per_type=4, seed=0)
    ours = edge_cut(g, asg.partition_of)
    rng = np.random.default_rng(0)
    random_cuts = []
    for _ in range(5):
        part = asg.partition_of.copy()
        for t in range(len(g.schema.vertex_types)):
            idx = np.flatnonzero(g.v_type == t)
            part[idx] = rng.permutation(part[idx])
        random_cuts.append(edge_cut(g, part))
    assert ours < min(random_cuts)


def test_assignment_json_round_trip():
    g = random_graph(2, nv=40, ne=100)
    asg = partition(g, workers=3, per_type=2, seed=1)
    buf = io.StringIO()
    asg.dump(g, buf)
    again = PartitionAssignment.from_json(json.loads(buf.getvalue()), g)
    assert (again.partition_of == asg.partition_of).all()
    assert (again.worker_of == asg.worker_of).all()
    with pytest.raises(ValueError, match="different graph"):
        PartitionAssignment.from_json(json.loads(buf.getvalue()), random_graph(3, nv=40, ne=100))


def test_bad_arguments():
    g = random_graph(2)
    with pytest.raises(ValueError):
        partition(g, workers=0)
    with pytest.raises(ValueError):
        partition(g, per_type=0)
