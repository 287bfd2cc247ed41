"""Synthetic social-network temporal graphs and path-query workloads.

The graph follows a denormalised social-network schema: persons follow each
other, join forums, create posts and comments and like messages. Country,
company, tags and languages are plain properties. Every entity is created at
some day of a three-year horizon and lives forever. In dynamic mode a
person's employer changes every year (country follows the employer), interests
grow as the person joins forums, and some follows edges end.

Query instances are sampled from random walks over the graph, so the walk
itself is a witness path and nearly every instance has a non-empty answer.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from typing import IO, Callable

import numpy as np

from .graph import GraphSchema, TemporalGraph, ValuePool
from .intervals import INFINITY

YEAR = 365
HORIZON = 3 * YEAR

COUNTRIES = ["India", "China", "USA", "Brazil", "Germany", "UK", "France", "Japan", "Indonesia", "Nigeria",
             "Mexico", "Russia", "Spain", "Italy", "Canada", "Kenya", "Egypt", "Vietnam", "Turkey", "Peru"]
LANGUAGES = ["en", "zh", "hi", "pt", "de", "es", "fr", "ja", "id", "ru"]
BROWSERS = ["Firefox", "Chrome", "Safari", "Opera", "Edge"]
GENDERS = ["female", "male"]
N_COMPANIES = 60
N_TAGS = 150

SCHEMA = GraphSchema(
    vertex_keys={
        "Person": ["Gender", "Country", "WorksAt", "Interest", "Browser"],
        "Forum": ["Tag"],
        "Post": ["Tag", "Language", "Country", "Browser"],
        "Comment": ["Tag", "Country", "Browser"],
    },
    edge_keys={t: [] for t in ("follows", "likes", "hasMember", "hasModerator", "hasCreator",
                               "containerOf", "replyOf")},
    multi_valued=frozenset({"Interest", "Tag"}),
)


class DegreeModel(enum.Enum):
    ALTMANN = "altmann"
    DISCRETE_WEIBULL = "weibull"
    FACEBOOK = "facebook"
    ZIPF = "zipf"


@dataclass
class GenConfig:
    persons: int = 1000
    degree_model: DegreeModel = DegreeModel.FACEBOOK
    dynamic: bool = False
    seed: int = 0
    horizon: int = HORIZON
    follows_mean: float = 10.2
    forums_per_person: float = 9.0
    members_per_forum: float = 40.0
    posts_per_person: float = 100.0
    comments_per_person: float = 400.0
    likes_per_person: float = 20.0
    interests_per_person: float = 23.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["degree_model"] = self.degree_model.value
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        obj = dict(obj)
        obj["degree_model"] = DegreeModel(obj.get("degree_model", "facebook"))
        return cls(**obj)


# -- degree distributions --------------------------------------------------------


def _shape(model: DegreeModel, k: np.ndarray, p: float) -> np.ndarray:
    if model is DegreeModel.ZIPF:
        return k ** -p
    if model is DegreeModel.ALTMANN:
        return k ** -1.5 * np.exp(-k / p)
    if model is DegreeModel.DISCRETE_WEIBULL:
        beta = 0.8
        return np.exp(-((k - 1) / p) ** beta) - np.exp(-(k / p) ** beta)
    # long-tailed lognormal, close to observed online friendship counts
    return np.exp(-((np.log(k) - p) ** 2) / 2.0) / k


_SEARCH = {
    DegreeModel.ZIPF: (1.01, 6.0, -1),
    DegreeModel.ALTMANN: (0.5, 1e4, 1),
    DegreeModel.DISCRETE_WEIBULL: (0.1, 1e3, 1),
    DegreeModel.FACEBOOK: (-3.0, 8.0, 1),
}


def degree_pmf(model: DegreeModel, mean: float, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities over degrees 1..kmax with the requested mean (bisection on the shape parameter)."""
    k = np.arange(1, max(kmax, 1) + 1, dtype=np.float64)
    lo, hi, sign = _SEARCH[model]
    mean = min(mean, k.mean() * 1.999)

    def m(p):
        w = _shape(model, k, p)
        return float((w * k).sum() / w.sum())

    for _ in range(100):
        mid = (lo + hi) / 2
        if (m(mid) - mean) * sign < 0:
            lo = mid
        else:
            hi = mid
    w = _shape(model, k, (lo + hi) / 2)
    return k.astype(np.int64), w / w.sum()


# -- graph generation ---------------------------------------------------------------


class _Builder:
    def __init__(self) -> None:
        self.pool = ValuePool()
        self.v: dict[str, list[np.ndarray]] = {c: [] for c in ("vid", "type", "ts", "te")}
        self.e: dict[str, list[np.ndarray]] = {c: [] for c in ("eid", "type", "src", "dst", "ts", "te")}
        self.p: dict[str, dict[str, list[np.ndarray]]] = {}
        self.next_eid = 0

    def vertices(self, vid, tname, ts):
        n = len(vid)
        self.v["vid"].append(vid)
        self.v["type"].append(np.full(n, SCHEMA.vtype_codes[tname]))
        self.v["ts"].append(ts)
        self.v["te"].append(np.full(n, INFINITY, dtype=np.int64))

    def edges(self, tname, src, dst, ts, te=None):
        n = len(src)
        self.e["eid"].append(np.arange(self.next_eid, self.next_eid + n))
        self.next_eid += n
        self.e["type"].append(np.full(n, SCHEMA.etype_codes[tname]))
        self.e["src"].append(src)
        self.e["dst"].append(dst)
        self.e["ts"].append(ts)
        self.e["te"].append(np.full(n, INFINITY, dtype=np.int64) if te is None else te)

    def prop(self, key, owner, values, ts, te=None):
        codes = np.array([self.pool.intern(x) for x in values], dtype=np.int64) if len(values) else \
            np.zeros(0, dtype=np.int64)
        cols = self.p.setdefault(key, {c: [] for c in ("owner", "value", "ts", "te")})
        cols["owner"].append(np.asarray(owner, dtype=np.int64))
        cols["value"].append(codes)
        cols["ts"].append(np.asarray(ts, dtype=np.int64))
        cols["te"].append(np.full(len(owner), INFINITY, dtype=np.int64) if te is None
                          else np.asarray(te, dtype=np.int64))

    def build(self) -> TemporalGraph:
        cat = lambda d: {k: np.concatenate(v) if v else np.zeros(0, dtype=np.int64) for k, v in d.items()}  # noqa: E731
        return TemporalGraph.from_arrays(SCHEMA, self.pool, cat(self.v), cat(self.e),
                                         {k: cat(c) for k, c in self.p.items()})


def _later(rng, start: np.ndarray, horizon: int, frac: float) -> np.ndarray:
    """A day at or after ``start`` and before ``horizon``, skewed towards ``start``."""
    room = np.maximum(horizon - 1 - start, 0)
    return start + np.floor(rng.random(len(start)) ** 2 * room * frac).astype(np.int64)


def _zipf_choice(rng, n: int, size: int, a: float = 1.1) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=np.float64) ** -a
    return rng.choice(n, size=size, p=w / w.sum())


def gen_graph(cfg: GenConfig) -> TemporalGraph:
    rng = np.random.default_rng(cfg.seed)
    H = cfg.horizon
    P = cfg.persons
    if P < 10:
        raise ValueError("need at least 10 persons")
    b = _Builder()
    tags = [f"Tag{i:03d}" for i in range(N_TAGS)]
    companies = [f"Company{i:02d}" for i in range(N_COMPANIES)]
    company_country = rng.choice(len(COUNTRIES), N_COMPANIES)

    # persons
    pid = np.arange(P, dtype=np.int64)
    p_ts = rng.integers(0, H // 2, P)
    b.vertices(pid, "Person", p_ts)
    home = _zipf_choice(rng, len(COUNTRIES), P, 0.8)
    b.prop("Gender", pid, [GENDERS[i] for i in rng.integers(0, 2, P)], p_ts)
    b.prop("Browser", pid, [BROWSERS[i] for i in rng.integers(0, len(BROWSERS), P)], p_ts)
    # employer per year; country follows the employer most of the time
    if cfg.dynamic:
        first_year = p_ts // YEAR
        years = (H - 1) // YEAR + 1
        owner, start, end, comp = [], [], [], []
        for y in range(years):
            mask = first_year <= y
            o = pid[mask]
            owner.append(o)
            start.append(np.maximum(p_ts[mask], y * YEAR))
            end.append(np.full(len(o), INFINITY if y == years - 1 else (y + 1) * YEAR, dtype=np.int64))
            comp.append(rng.integers(0, N_COMPANIES, len(o)))
        owner, start, end, comp = map(np.concatenate, (owner, start, end, comp))
    else:
        owner, start, end = pid, p_ts, np.full(P, INFINITY, dtype=np.int64)
        comp = rng.integers(0, N_COMPANIES, P)
    ctry = np.where(rng.random(len(owner)) < 0.8, company_country[comp], home[owner])
    b.prop("WorksAt", owner, [companies[c] for c in comp], start, end)
    b.prop("Country", owner, [COUNTRIES[c] for c in ctry], start, end)
    country_at = _step_lookup(owner, start, end, ctry)

    interests: list[set[int]] = []
    n_int = np.maximum(1, rng.poisson(cfg.interests_per_person, P))
    for i in range(P):
        interests.append(set(_zipf_choice(rng, N_TAGS, int(min(n_int[i], N_TAGS // 2))).tolist()))

    # follows
    kvals, pmf = degree_pmf(cfg.degree_model, cfg.follows_mean, P - 1)
    deg = rng.choice(kvals, size=P, p=pmf)
    src = np.repeat(pid, deg)
    dst = rng.integers(0, P - 1, len(src))
    dst = np.where(dst >= src, dst + 1, dst)
    pair = np.unique(src * P + dst)
    src, dst = pair // P, pair % P
    f_ts = _later(rng, np.maximum(p_ts[src], p_ts[dst]), H, 0.6)
    f_te = np.full(len(src), INFINITY, dtype=np.int64)
    if cfg.dynamic:
        ends = rng.random(len(src)) < 0.2
        f_te[ends] = f_ts[ends] + 1 + np.floor(rng.random(ends.sum()) * (H - f_ts[ends])).astype(np.int64)
    b.edges("follows", src, dst, f_ts, f_te)

    # forums, moderators, members
    F = max(1, int(round(cfg.forums_per_person * P)))
    fid = P + np.arange(F, dtype=np.int64)
    mod = rng.integers(0, P, F)
    fo_ts = _later(rng, p_ts[mod], H, 0.3)
    b.vertices(fid, "Forum", fo_ts)
    f_tags: list[list[int]] = []
    fo_owner, fo_tag = [], []
    for i in range(F):
        own = sorted(interests[mod[i]])
        k = int(rng.integers(1, 4))
        pick = set(rng.choice(own, size=min(k, len(own)), replace=False).tolist()) if own else set()
        if rng.random() < 0.3:
            pick.add(int(_zipf_choice(rng, N_TAGS, 1)[0]))
        f_tags.append(sorted(pick))
        fo_owner += [fid[i]] * len(pick)
        fo_tag += sorted(pick)
    b.prop("Tag", fo_owner, [tags[t] for t in fo_tag], fo_ts[np.asarray(fo_owner, dtype=np.int64) - P])
    b.edges("hasModerator", fid, mod, fo_ts)
    n_mem = np.minimum(np.maximum(1, rng.poisson(cfg.members_per_forum, F)), P)
    m_forum = np.repeat(np.arange(F), n_mem)
    m_person = rng.integers(0, P, len(m_forum))
    m_person[np.r_[0, np.cumsum(n_mem)[:-1]]] = mod  # the moderator is a member
    key = np.unique(m_forum * P + m_person)
    m_forum, m_person = key // P, key % P
    m_ts = _later(rng, np.maximum(fo_ts[m_forum], p_ts[m_person]), H, 0.5)
    b.edges("hasMember", fid[m_forum], m_person, m_ts)

    # interests: initial ones, then (dynamic) tags of joined forums from the join day
    io, iv, its = [], [], []
    for i in range(P):
        for t in sorted(interests[i]):
            io.append(i)
            iv.append(t)
            its.append(p_ts[i])
    if cfg.dynamic:
        first: dict[tuple[int, int], int] = {}
        for fo, pe, ts in zip(m_forum.tolist(), m_person.tolist(), m_ts.tolist()):
            for t in f_tags[fo]:
                if t not in interests[pe]:
                    k = (pe, t)
                    if k not in first or ts < first[k]:
                        first[k] = ts
        for (pe, t), ts in sorted(first.items()):
            io.append(pe)
            iv.append(t)
            its.append(ts)
    b.prop("Interest", io, [tags[t] for t in iv], its)

    # posts, each written into a forum the creator belongs to
    NP = int(round(cfg.posts_per_person * P))
    post_id = P + F + np.arange(NP, dtype=np.int64)
    mem = rng.integers(0, len(m_forum), NP)
    po_forum, po_creator = m_forum[mem], m_person[mem]
    po_ts = _later(rng, m_ts[mem], H, 0.7)
    b.vertices(post_id, "Post", po_ts)
    b.edges("containerOf", fid[po_forum], post_id, po_ts)
    b.edges("hasCreator", post_id, po_creator, po_ts)
    po_tags = []
    for i in range(NP):
        pool = f_tags[po_forum[i]] or sorted(interests[po_creator[i]])
        k = 1 + int(rng.random() < 0.4)
        po_tags.append(sorted(set(rng.choice(pool, size=min(k, len(pool)), replace=False).tolist())))
    _tag_props(b, post_id, po_tags, po_ts, tags)
    c_here = country_at(po_creator, po_ts)
    po_ctry = np.where(rng.random(NP) < 0.9, c_here, rng.integers(0, len(COUNTRIES), NP))
    b.prop("Country", post_id, [COUNTRIES[c] for c in po_ctry], po_ts)
    lang = np.where(rng.random(NP) < 0.8, c_here % len(LANGUAGES), rng.integers(0, len(LANGUAGES), NP))
    b.prop("Language", post_id, [LANGUAGES[x] for x in lang], po_ts)
    b.prop("Browser", post_id, [BROWSERS[x] for x in rng.integers(0, len(BROWSERS), NP)], po_ts)

    # comments: replies to posts, then replies to those replies
    NC = int(round(cfg.comments_per_person * P)) if NP else 0
    c_id = P + F + NP + np.arange(NC, dtype=np.int64)
    n1 = NC - NC * 3 // 10
    c_ts = np.zeros(NC, dtype=np.int64)
    c_parent = np.zeros(NC, dtype=np.int64)
    c_creator = rng.integers(0, P, NC)
    c_tags: list[list[int]] = [[] for _ in range(NC)]
    if n1:
        par = rng.integers(0, NP, n1)
        c_parent[:n1] = post_id[par]
        c_ts[:n1] = _later(rng, np.maximum(po_ts[par], p_ts[c_creator[:n1]]), H, 0.3)
        for i in range(n1):
            c_tags[i] = _reply_tags(rng, po_tags[par[i]])
    if n1 and NC > n1:
        par = rng.integers(0, n1, NC - n1)
        c_parent[n1:] = c_id[par]
        c_ts[n1:] = _later(rng, np.maximum(c_ts[par], p_ts[c_creator[n1:]]), H, 0.3)
        for j, i in enumerate(range(n1, NC)):
            c_tags[i] = _reply_tags(rng, c_tags[par[j]])
    b.vertices(c_id, "Comment", c_ts)
    b.edges("replyOf", c_id, c_parent, c_ts)
    b.edges("hasCreator", c_id, c_creator, c_ts)
    _tag_props(b, c_id, c_tags, c_ts, tags)
    cc = np.where(rng.random(NC) < 0.9, country_at(c_creator, c_ts), rng.integers(0, len(COUNTRIES), NC))
    b.prop("Country", c_id, [COUNTRIES[c] for c in cc], c_ts)
    b.prop("Browser", c_id, [BROWSERS[x] for x in rng.integers(0, len(BROWSERS), NC)], c_ts)

    # likes of posts (mostly) and comments
    nl = rng.poisson(cfg.likes_per_person, P)
    l_person = np.repeat(pid, nl)
    if NP:
        on_post = rng.random(len(l_person)) < (0.7 if NC else 1.0)
        msg = np.where(on_post, post_id[rng.integers(0, NP, len(l_person))],
                       c_id[rng.integers(0, max(NC, 1), len(l_person))] if NC else 0)
        nall = P + F + NP + NC
        k = np.unique(l_person * nall + msg)
        l_person, msg = k // nall, k % nall
        is_post = msg < P + F + NP
        msg_ts = np.where(is_post, po_ts[np.clip(msg - P - F, 0, NP - 1)],
                          c_ts[np.clip(msg - P - F - NP, 0, max(NC - 1, 0))] if NC else 0)
        l_ts = _later(rng, np.maximum(p_ts[l_person], msg_ts), H, 0.3)
        b.edges("likes", l_person, msg, l_ts)
    return b.build()


def _reply_tags(rng, parent: list[int]) -> list[int]:
    out = set(parent[:1])
    if rng.random() < 0.22 or not out:
        out.add(int(_zipf_choice(rng, N_TAGS, 1)[0]) if rng.random() < 0.5 or not parent else
                int(rng.choice(parent)))
    return sorted(out)


def _tag_props(b: _Builder, ids, tag_lists, ts, names):
    owner = np.repeat(ids, [len(t) for t in tag_lists])
    vals = [names[t] for ts_ in tag_lists for t in ts_]
    b.prop("Tag", owner, vals, np.repeat(ts, [len(t) for t in tag_lists]))


def _step_lookup(owner, start, end, value) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Value of a piecewise-constant per-owner attribute at given times."""
    order = np.lexsort((start, owner))
    owner, start, value = owner[order], start[order], value[order]

    def at(who: np.ndarray, t: np.ndarray) -> np.ndarray:
        # position of the last record of ``who`` starting at or before ``t``
        key = who.astype(np.float64) * (2.0 ** 40) + t
        ref = owner.astype(np.float64) * (2.0 ** 40) + start
        pos = np.searchsorted(ref, key, side="right") - 1
        return value[np.maximum(pos, 0)]

    return at


def dump_config(cfg: GenConfig, out: IO[str]) -> None:
    json.dump(cfg.to_json(), out, indent=1)


# -- workload ---------------------------------------------------------------------

TEMPLATES = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Q8")
# (vertices, property clauses other than Type, time clauses, uses ETR)
SHAPES = {
    "Q1": (3, 4, 1, True),
    "Q2": (2, 6, 1, False),
    "Q3": (3, 6, 1, True),
    "Q4": (4, 3, 2, True),
    "Q5": (5, 7, 3, True),
    "Q6": (5, 7, 1, True),
    "Q7": (4, 5, 3, True),
    "Q8": (3, 3, 1, True),
}


class WorkloadError(ValueError):
    pass


class _Walker:
    """Random walks over typed adjacency, plus property reads at a time point."""

    def __init__(self, g: TemporalGraph, rng: np.random.Generator) -> None:
        self.g, self.rng = g, rng
        self.vt = g.schema.vtype_codes
        self.et = g.schema.etype_codes
        self.by_type = {t: np.flatnonzero(g.v_type == c) for t, c in self.vt.items()}

    def pick(self, vtype: str) -> int:
        pool = self.by_type[vtype]
        if not len(pool):
            raise WorkloadError(f"graph has no {vtype} vertices")
        return int(pool[self.rng.integers(len(pool))])

    def incident(self, v: int, etype: str, out: bool) -> np.ndarray:
        g = self.g
        ptr, items = (g.out_ptr, g.out_edges) if out else (g.in_ptr, g.in_edges)
        es = items[ptr[v]:ptr[v + 1]]
        return es[g.e_type[es] == self.et[etype]]

    def step(self, v: int, etype: str, out: bool, ok=None) -> tuple[int, int] | None:
        es = self.incident(v, etype, out)
        if ok is not None and len(es):
            es = es[[ok(int(e)) for e in es]]
        if not len(es):
            return None
        e = int(es[self.rng.integers(len(es))])
        other = int(self.g.e_dst[e] if out else self.g.e_src[e])
        return e, other

    def values(self, v: int, key: str, t: int) -> list:
        g = self.g
        col = g.vprops.get(g.schema.key_codes[key])
        if col is None:
            return []
        sl = col.records_of(v)
        live = (col.ts[sl] <= t) & (t < col.te[sl])
        return [g.pool.values[c] for c in col.value[sl][live]]

    def one(self, v: int, key: str, t: int):
        vals = self.values(v, key, t)
        if not vals:
            raise _Retry
        return vals[int(self.rng.integers(len(vals)))]

    def alive(self, t: int, *edges: int) -> bool:
        return all(self.g.e_ts[e] <= t < self.g.e_te[e] for e in edges)

    def since(self, v: int) -> str:
        """A time clause that the vertex's lifespan satisfies."""
        ts = int(self.g.v_ts[v])
        if ts > 0 and self.rng.random() < 0.7:
            d = int(self.rng.integers(max(0, ts - 120), ts))
            return f"LIFESPAN safter [{d},{d + 1}]"
        d = int(self.rng.integers(ts + 1, ts + 121))
        return f"LIFESPAN sbefore [{d},{d + 1}]"


class _Retry(Exception):
    pass


def _q(x) -> str:
    return json.dumps(x)


def _t(edges: list[int], g: TemporalGraph) -> int:
    return int(max(g.e_ts[e] for e in edges))


def _q1(w: _Walker) -> str:
    g = w.g
    f = w.pick("Forum")
    a = w.step(f, "containerOf", True)
    if a is None:
        raise _Retry
    b = w.step(f, "containerOf", True, lambda e: g.e_ts[e] > g.e_ts[a[0]])
    if b is None:
        raise _Retry
    t = _t([a[0], b[0]], g)
    t1 = w.one(a[1], "Tag", t)
    t2s = [x for x in w.values(b[1], "Tag", t) if x != t1]
    if not t2s:
        raise _Retry
    t2 = t2s[int(w.rng.integers(len(t2s)))]
    return (f'{{Type=="Post" && Tag CONTAINS {_q(t1)} && Language=={_q(w.one(a[1], "Language", t))}}} '
            f'<-[Type=="containerOf"]- {{Type=="Forum" && Tag CONTAINS {_q(w.one(f, "Tag", t))}}} ETR(sbefore) '
            f'-[Type=="containerOf"]-> {{{w.since(b[1])} && Type=="Post" && Tag CONTAINS {_q(t2)}}}')


def _q2(w: _Walker) -> str:
    g = w.g
    p = w.pick("Person")
    s = w.step(p, "hasCreator", False, lambda e: g.v_type[g.e_src[e]] == w.vt["Post"])
    if s is None:
        raise _Retry
    e, post = s
    t = _t([e], g)
    common = sorted(set(w.values(p, "Interest", t)) & set(w.values(post, "Tag", t)))
    if not common:
        raise _Retry
    tag = common[int(w.rng.integers(len(common)))]
    return (f'{{Type=="Person" && Interest CONTAINS {_q(tag)} && Gender=={_q(w.one(p, "Gender", t))} '
            f'&& Country=={_q(w.one(p, "Country", t))}}} <-[Type=="hasCreator"]- '
            f'{{{w.since(post)} && Type=="Post" && Tag CONTAINS {_q(tag)} '
            f'&& Browser=={_q(w.one(post, "Browser", t))} && Language=={_q(w.one(post, "Language", t))}}}')


def _q3(w: _Walker) -> str:
    g = w.g
    post = w.pick("Post")
    a = w.step(post, "likes", False)
    if a is None:
        raise _Retry
    b = w.step(post, "likes", False, lambda e: g.e_ts[e] > g.e_ts[a[0]])
    if b is None:
        raise _Retry
    t = _t([a[0], b[0]], g)
    return (f'{{Type=="Person" && Country=={_q(w.one(a[1], "Country", t))} '
            f'&& Gender=={_q(w.one(a[1], "Gender", t))}}} -[Type=="likes"]-> '
            f'{{{w.since(post)} && Type=="Post" && Tag CONTAINS {_q(w.one(post, "Tag", t))} '
            f'&& Language=={_q(w.one(post, "Language", t))}}} ETR(sbefore) <-[Type=="likes"]- '
            f'{{Type=="Person" && Country=={_q(w.one(b[1], "Country", t))} '
            f'&& Gender=={_q(w.one(b[1], "Gender", t))}}}')


def _q4(w: _Walker) -> str:
    g = w.g
    p1 = w.pick("Person")
    a = w.step(p1, "follows", True)
    if a is None:
        raise _Retry
    b = w.step(a[1], "follows", True, lambda e: g.e_ts[e] > g.e_ts[a[0]] and int(g.e_dst[e]) != p1)
    if b is None:
        raise _Retry
    c = w.step(b[1], "follows", True, lambda e: g.e_ts[e] > g.e_ts[b[0]])
    if c is None:
        raise _Retry
    t = _t([a[0], b[0], c[0]], g)
    if not w.alive(t, a[0], b[0], c[0]):
        raise _Retry
    return (f'{{Type=="Person" && Country=={_q(w.one(p1, "Country", t))}}} -[Type=="follows"]-> '
            f'{{{w.since(a[1])} && Type=="Person"}} ETR(sbefore) -[Type=="follows"]-> '
            f'{{Type=="Person" && Gender=={_q(w.one(b[1], "Gender", t))}}} ETR(sbefore) -[Type=="follows"]-> '
            f'{{{w.since(c[1])} && Type=="Person" && Country=={_q(w.one(c[1], "Country", t))}}}')


def _q5(w: _Walker) -> str:
    g = w.g
    f = w.pick("Forum")
    a = w.step(f, "containerOf", True)
    if a is None:
        raise _Retry
    b = w.step(f, "containerOf", True, lambda e: g.e_ts[e] > g.e_ts[a[0]])
    if b is None:
        raise _Retry
    ca = w.step(a[1], "hasCreator", True)
    cb = w.step(b[1], "hasCreator", True)
    t = _t([a[0], b[0], ca[0], cb[0]], g)
    t1 = w.one(a[1], "Tag", t)
    t2s = [x for x in w.values(b[1], "Tag", t) if x != t1]
    if not t2s:
        raise _Retry
    t2 = t2s[int(w.rng.integers(len(t2s)))]
    return (f'{{Type=="Person" && Country=={_q(w.one(ca[1], "Country", t))}}} <-[Type=="hasCreator"]- '
            f'{{{w.since(a[1])} && Type=="Post" && Tag CONTAINS {_q(t1)} '
            f'&& Language=={_q(w.one(a[1], "Language", t))}}} <-[Type=="containerOf"]- '
            f'{{{w.since(f)} && Type=="Forum" && Tag CONTAINS {_q(w.one(f, "Tag", t))}}} ETR(sbefore) '
            f'-[Type=="containerOf"]-> {{{w.since(b[1])} && Type=="Post" && Tag CONTAINS {_q(t2)} '
            f'&& Browser=={_q(w.one(b[1], "Browser", t))}}} -[Type=="hasCreator"]-> '
            f'{{Type=="Person" && Gender=={_q(w.one(cb[1], "Gender", t))}}}')


def _q6(w: _Walker) -> str:
    g = w.g
    post = w.pick("Post")
    a = w.step(post, "replyOf", False)
    if a is None:
        raise _Retry
    b = w.step(post, "replyOf", False, lambda e: g.e_ts[e] < g.e_ts[a[0]])
    if b is None:
        raise _Retry
    ca = w.step(a[1], "hasCreator", True)
    cb = w.step(b[1], "hasCreator", True)
    t = _t([a[0], b[0], ca[0], cb[0]], g)
    return (f'{{Type=="Person" && Gender=={_q(w.one(ca[1], "Gender", t))} '
            f'&& Country=={_q(w.one(ca[1], "Country", t))}}} <-[Type=="hasCreator"]- '
            f'{{Type=="Comment" && Browser=={_q(w.one(a[1], "Browser", t))} '
            f'&& Tag CONTAINS {_q(w.one(a[1], "Tag", t))}}} -[Type=="replyOf"]-> '
            f'{{Type=="Post" && Language=={_q(w.one(post, "Language", t))}}} ETR(safter) <-[Type=="replyOf"]- '
            f'{{{w.since(b[1])} && Type=="Comment" && Browser=={_q(w.one(b[1], "Browser", t))}}} '
            f'-[Type=="hasCreator"]-> {{Type=="Person" && Country=={_q(w.one(cb[1], "Country", t))}}}')


def _q7(w: _Walker) -> str:
    g = w.g
    p = w.pick("Person")
    posts = w.incident(p, "hasCreator", False)
    posts = posts[g.v_type[g.e_src[posts]] == w.vt["Post"]]
    if not len(posts):
        raise _Retry
    e1 = int(posts[w.rng.integers(len(posts))])
    p1 = int(g.e_src[e1])
    f = w.step(p, "follows", True, lambda e: g.e_ts[e] > g.e_ts[e1])
    if f is None:
        raise _Retry
    q = f[1]
    s = w.step(q, "hasCreator", False, lambda e: g.v_type[g.e_src[e]] == w.vt["Post"])
    if s is None:
        raise _Retry
    e3, p2 = s
    t = _t([e1, f[0], e3], g)
    if not w.alive(t, f[0]):
        raise _Retry
    return (f'{{{w.since(p1)} && Type=="Post" && Country=={_q(w.one(p1, "Country", t))} '
            f'&& Language=={_q(w.one(p1, "Language", t))}}} -[Type=="hasCreator"]-> '
            f'{{Type=="Person" && Country=={_q(w.one(p, "Country", t))}}} ETR(sbefore) -[Type=="follows"]-> '
            f'{{{w.since(q)} && Type=="Person" && Country=={_q(w.one(q, "Country", t))}}} '
            f'<-[Type=="hasCreator"]- {{{w.since(p2)} && Type=="Post" && Country=={_q(w.one(p2, "Country", t))}}}')


def _q8(w: _Walker) -> str:
    g = w.g
    mid = w.pick("Person")
    a = w.step(mid, "follows", False)
    if a is None:
        raise _Retry
    b = w.step(mid, "follows", False, lambda e: int(g.e_src[e]) != a[1])
    if b is None:
        raise _Retry
    t = _t([a[0], b[0]], g)
    if not w.alive(t, a[0], b[0]):
        raise _Retry
    c1, c2 = w.one(a[1], "WorksAt", t), w.one(b[1], "WorksAt", t)
    if c1 == c2:
        raise _Retry
    return (f'{{Type=="Person" && WorksAt=={_q(c1)}}} -[Type=="follows"]-> '
            f'{{{w.since(mid)} && Type=="Person" && Country=={_q(w.one(mid, "Country", t))}}} ETR(ov) '
            f'<-[Type=="follows"]- {{Type=="Person" && WorksAt=={_q(c2)}}}')


_BUILDERS = {"Q1": _q1, "Q2": _q2, "Q3": _q3, "Q4": _q4, "Q5": _q5, "Q6": _q6, "Q7": _q7, "Q8": _q8}


def gen_queries(g: TemporalGraph, template: str, count: int, seed: int = 0, aggregate: bool = False,
                dynamic: bool | None = None, attempts: int = 2000) -> list[str]:
    """``count`` instances of ``template`` with parameters read off random walks."""
    if template not in _BUILDERS:
        raise WorkloadError(f"unknown template {template!r}")
    if template == "Q8":
        from .graph import is_static

        if (not dynamic) if dynamic is not None else is_static(g):
            raise WorkloadError("Q8 needs a dynamic graph")
    w = _Walker(g, np.random.default_rng([seed, TEMPLATES.index(template)]))
    out: list[str] = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > attempts + count * 50:
            raise WorkloadError(f"could not sample {count} instances of {template}")
        try:
            text = _BUILDERS[template](w)
        except _Retry:
            continue
        out.append(text + (" AGG count(*)" if aggregate else ""))
    return out


def query_shape(q) -> tuple[int, int, int, bool]:
    """(vertices, non-Type property clauses, time clauses, has ETR) of a parsed query."""
    from .query import BoolExpr, PropClause

    def props(e):
        if e is None:
            return 0
        if isinstance(e, PropClause):
            return 0 if e.key == "Type" else 1
        assert isinstance(e, BoolExpr)
        return props(e.left) + props(e.right)

    preds = list(q.vertices) + [e.predicate for e in q.edges]
    return (q.n, sum(props(p.expr) for p in preds), sum(p.time is not None for p in preds),
            any(x is not None for x in q.etr))


def write_workload(queries: dict[str, list[str]], out_dir, manifest: dict) -> None:
    """One query per line per template, plus a manifest describing how they were made."""
    from pathlib import Path

    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, qs in queries.items():
        path = d / f"{name}.txt"
        path.write_text("".join(q + "\n" for q in qs))
        files[name] = {"file": path.name, "count": len(qs)}
    (d / "manifest.json").write_text(json.dumps({**manifest, "templates": files}, indent=1))

