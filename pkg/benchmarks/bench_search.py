"""Time the compiled and pure-Python isomorphism-search kernels on the same inputs.

    python benchmarks/bench_search.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from gdnlab import graph, kernels, orbits


def cases():
    rng = np.random.default_rng(0)
    yield "edgeless-8 (all automorphisms)", graph.empty(8), "all"
    yield "edgeless-9 (all automorphisms)", graph.empty(9), "all"
    yield "K9 (all automorphisms)", graph.complete(9), "all"
    yield "C4+C4 orbits", graph.disjoint_union(graph.cycle(4), graph.cycle(4)), "orbits"
    yield "C10 orbits", graph.cycle(10), "orbits"
    for k in range(3):
        yield f"G(10, 0.4) #{k} orbits", graph.random_graph(10, 0.4, rng), "orbits"


def run(g, task, search):
    if task == "all":
        return len(orbits.automorphisms(g, search=search))
    return len(orbits.orbit_partition(g, search=search))


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json")
    args = p.parse_args(argv)
    if kernels.compiled_search is None:
        raise SystemExit("compiled kernel unavailable; build with `pip install -e . --no-build-isolation`")
    rows = []
    print(f"{'case':34s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s}")
    for name, g, task in cases():
        tc, rc = best_time(lambda: run(g, task, kernels.compiled_search), args.repeat)
        tp, rp = best_time(lambda: run(g, task, kernels.python_search), args.repeat)
        if rc != rp:
            raise SystemExit(f"backends disagree on {name}: {rc} vs {rp}")
        rows.append(dict(case=name, compiled=tc, python=tp, speedup=tp / tc, result=rc))
        print(f"{name:34s} {tc:11.4f} {tp:10.4f} {tp / tc:7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
