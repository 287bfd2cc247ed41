"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py --size 200000 --repeat 5
    python3 benchmarks/bench_kernels.py --workload --persons 2000

The first form times each kernel in-process. ``--workload`` also runs a
generated query workload end to end once per backend, in a subprocess so
the backend is picked at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from tempograph import kernels


def interval_set(rng, n, entities, horizon=10_000):
    ent = np.sort(rng.integers(0, entities, n)).astype(np.int64)
    ts = rng.integers(0, horizon - 1, n).astype(np.int64)
    te = ts + rng.integers(1, horizon // 20, n)
    return kernels._kernels_py.normalize(ent, ts, te)


def cases(size, seed):
    rng = np.random.default_rng(seed)
    entities = max(1, size // 8)
    a, b = interval_set(rng, size, entities), interval_set(rng, size, entities)
    raw = (np.sort(rng.integers(0, entities, size)).astype(np.int64),
           rng.integers(0, 5000, size).astype(np.int64))
    raw = raw + (raw[1] + rng.integers(1, 500, size),)
    deg = rng.integers(0, 12, entities)
    ptr = np.concatenate(([0], np.cumsum(deg))).astype(np.int64)
    items = rng.integers(0, entities, int(ptr[-1])).astype(np.int64)
    sources = rng.integers(0, entities, size // 4).astype(np.int64)
    return {
        "normalize": lambda k: k.normalize(*raw),
        "combine-and": lambda k: k.combine(*a, *b, kernels.AND),
        "combine-or": lambda k: k.combine(*a, *b, kernels.OR),
        "combine-andnot": lambda k: k.combine(*a, *b, kernels.ANDNOT),
        "csr_expand": lambda k: k.csr_expand(ptr, items, sources),
        "overlap_pairs": lambda k: k.overlap_pairs(*a, *b),
        "relate_arrays": lambda k: k.relate_arrays(a[1], a[2], a[1][::-1].copy(), a[2][::-1].copy(),
                                                   kernels.CMP_CODES["OVERLAPS"]),
    }


def best_ms(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return min(times)


WORKLOAD_SCRIPT = """
import json, sys, time
from tempograph import kernels
from tempograph.engine import Engine
from tempograph.generator import TEMPLATES, GenConfig, gen_graph, gen_queries
from tempograph.query import parse
persons, per_template = int(sys.argv[1]), int(sys.argv[2])
g = gen_graph(GenConfig(persons=persons, seed=7, dynamic=True))
queries = [parse(t) for tm in TEMPLATES for t in gen_queries(g, tm, per_template, seed=1, dynamic=True)]
with Engine(g) as eng:
    eng.execute(queries[0])
    t0 = time.perf_counter()
    rows = sum(len(eng.execute(q)) for q in queries)
    ms = (time.perf_counter() - t0) * 1e3
print(json.dumps({"backend": kernels.BACKEND, "queries": len(queries), "rows": rows, "ms": ms}))
"""


def run_workload(persons, per_template, pure):
    env = dict(os.environ, TEMPOGRAPH_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", WORKLOAD_SCRIPT, str(persons), str(per_template)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=200_000, help="intervals per input set")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workload", action="store_true", help="also time a generated query workload")
    ap.add_argument("--persons", type=int, default=2000)
    ap.add_argument("--per-template", type=int, default=10)
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    names = list(impls)
    print(f"{'kernel':<16}" + "".join(f"{n + ' ms':>14}" for n in names) + (f"{'speedup':>10}" if len(names) > 1 else ""))
    for label, fn in cases(args.size, args.seed).items():
        ms = {n: best_ms(lambda: fn(impls[n]), args.repeat) for n in names}
        line = f"{label:<16}" + "".join(f"{ms[n]:>14.2f}" for n in names)
        if len(names) > 1:
            line += f"{ms['python'] / ms['cython']:>9.1f}x"
        print(line)

    if args.workload:
        runs = [run_workload(args.persons, args.per_template, pure) for pure in (True, False)]
        print()
        for r in runs:
            print(f"workload  {r['backend']:<8} {r['queries']} queries, {r['rows']} rows, {r['ms']:.0f} ms")
        if runs[0]["rows"] != runs[1]["rows"]:
            print("backends disagree on the result count", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
