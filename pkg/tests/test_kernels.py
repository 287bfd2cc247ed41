import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempograph import kernels
from tempograph.intervals import union_all

IMPLS = kernels.implementations()


def test_compiled_backend_available():
    assert "cython" in IMPLS


raw_sets = st.lists(
    st.tuples(st.integers(0, 4), st.integers(0, 30), st.integers(1, 12)), max_size=25
).map(lambda xs: [(e, s, s + d) for e, s, d in xs])


def _arrays(recs):
    a = np.array(recs, dtype=np.int64).reshape(-1, 3)
    return a[:, 0].copy(), a[:, 1].copy(), a[:, 2].copy()


def _by_entity(recs):
    out = {}
    for e, s, t in recs:
        out.setdefault(e, []).append((s, t))
    return {e: union_all(v) for e, v in out.items()}


def _points(norm):
    return {(e, t) for e, ivs in norm.items() for iv in ivs for t in range(iv[0], iv[1])}


def _as_list(res):
    return list(zip(*(x.tolist() for x in res)))


@pytest.mark.parametrize("name", sorted(IMPLS))
@given(raw_sets)
def test_normalize_matches_reference(name, recs):
    res = _as_list(IMPLS[name].normalize(*_arrays(recs)))
    expect = [(e, iv.ts, iv.te) for e, ivs in sorted(_by_entity(recs).items()) for iv in ivs]
    assert res == expect


@pytest.mark.parametrize("name", sorted(IMPLS))
@pytest.mark.parametrize("op", [kernels.AND, kernels.OR, kernels.ANDNOT])
@given(raw_sets, raw_sets)
def test_combine_pointwise(name, op, ra, rb):
    impl = IMPLS[name]
    a = impl.normalize(*_arrays(ra))
    b = impl.normalize(*_arrays(rb))
    res = impl.combine(*a, *b, op)
    pa, pb = _points(_by_entity(ra)), _points(_by_entity(rb))
    expect = {kernels.AND: pa & pb, kernels.OR: pa | pb, kernels.ANDNOT: pa - pb}[op]
    got = _as_list(res)
    assert {(e, t) for e, s, f in got for t in range(s, f)} == expect
    # result is normalized: sorted, disjoint, non-adjacent
    for (e1, s1, f1), (e2, s2, f2) in zip(got, got[1:]):
        assert (e1, s1) < (e2, s2)
        assert e1 != e2 or f1 < s2


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_csr_expand(name):
    ptr = np.array([0, 2, 2, 5], dtype=np.int64)
    items = np.array([10, 11, 20, 21, 22], dtype=np.int64)
    rep, val = IMPLS[name].csr_expand(ptr, items, np.array([2, 1, 0], dtype=np.int64))
    assert rep.tolist() == [0, 0, 0, 2, 2]
    assert val.tolist() == [20, 21, 22, 10, 11]


@pytest.mark.parametrize("name", sorted(IMPLS))
@given(raw_sets, raw_sets)
def test_overlap_pairs(name, rq, rs):
    q = _arrays(rq)
    rs = sorted(rs)
    s = _arrays(rs)
    qi, sj = IMPLS[name].overlap_pairs(*q, *s)
    got = sorted(zip(qi.tolist(), sj.tolist()))
    expect = sorted(
        (i, j) for i, (e, a, b) in enumerate(rq) for j, (f, c, d) in enumerate(rs) if e == f and a < d and c < b
    )
    assert got == expect


@pytest.mark.parametrize("code", range(9))
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(1, 5), st.integers(0, 9), st.integers(1, 5)), max_size=30))
@settings(max_examples=40)
def test_relate_backends_agree(code, rows):
    from tempograph.intervals import Cmp, relate

    arr = np.array([(a, a + d, b, b + e) for a, d, b, e in rows], dtype=np.int64).reshape(-1, 4)
    cmp = next(c for c in Cmp if kernels.CMP_CODES[c.name] == code)
    expect = [relate((r[0], r[1]), (r[2], r[3]), cmp) for r in arr.tolist()]
    for impl in IMPLS.values():
        got = impl.relate_arrays(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], code)
        assert got.tolist() == expect
