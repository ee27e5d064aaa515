"""Time the compiled kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--agents 2000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from trustwebrank import kernels
from trustwebrank.graph import RandomGraphSpec, generate_random_graph
from trustwebrank.metric import normalize_direct
from trustwebrank.simulate import SimulationConfig, initial_state, step


def walk_case(n, d, rows, L, seed=0):
    g = generate_random_graph(RandomGraphSpec(n, d, seed))
    rng = np.random.default_rng(seed)
    for i in range(n):
        for j in g.neighbours(i):
            g.add_edge(i, j, float(rng.uniform(0.1, 1.0)))
    S = normalize_direct(g).values
    src = np.sort(rng.choice(n, size=min(rows, n), replace=False)).astype(np.int64)
    return (S.indptr.astype(np.int64), S.indices.astype(np.int64), S.data, n, src, 0.8, L, 1e-9)


def edge_case(n, d, seed=0):
    g = generate_random_graph(RandomGraphSpec(n, d, seed))
    indptr, indices, w = g.to_csr()
    rng = np.random.default_rng(seed)
    src = np.repeat(np.arange(n), np.diff(indptr))
    w = rng.random(indices.size)
    pi = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    sig = (rng.random(n) < 0.25).astype(np.uint8)
    preds = rng.uniform(-1, 1, n)
    return (src, indices, w, pi, sig, preds, 0.75, 0.5, False)


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=2000)
    ap.add_argument("--degree", type=float, default=10.0)
    ap.add_argument("--rows", type=int, default=200, help="source rows for the walk kernel")
    ap.add_argument("--walk-cutoff", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    if len(backends) == 1:
        print("compiled backend not built; timing the fallback only")

    walk = walk_case(args.agents, args.degree, args.rows, args.walk_cutoff)
    edges = edge_case(500, 7)
    cfg = SimulationConfig(runs=1, steps=1)

    results = {}
    for name in backends:
        mod = kernels.get_backend(name)
        state = initial_state(cfg, 0)
        results[name] = {
            "truncated_walk_rows": best(lambda: mod.truncated_walk_rows(*walk), args.repeat),
            "edge_step": best(lambda: mod.edge_step(*edges), args.repeat * 20),
            "simulation step (n=500)": best(lambda: step(state, cfg, backend=mod), args.repeat),
        }

    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for kernel in results["python"]:
        line = f"{kernel:<26}" + "".join(f"{results[b][kernel] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{results['python'][kernel] / results['cython'][kernel]:>11.1f}x"
        print(line)
    print(f"walk: n={args.agents} d={args.degree} rows={args.rows} L={args.walk_cutoff}; "
          f"edge_step: {edges[1].size} edges")


if __name__ == "__main__":
    main()
