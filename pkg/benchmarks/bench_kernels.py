"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --repeat 3
"""
import argparse
import time

import numpy as np

from pathcf import _pykernels
from pathcf.graph import AttributeRow, Interaction, build_graph
from pathcf.synthetic import SyntheticSpec, generate

try:
    from pathcf import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(g, walks_per_vertex, seed):
    rng = np.random.default_rng(seed)
    starts = np.repeat(np.arange(g.num_nodes, dtype=np.int64), walks_per_vertex)
    u6 = rng.random((len(starts), 5))
    u20 = rng.random((len(starts), 19))
    n, d, m = g.num_nodes, 32, 20_000
    centers = rng.integers(n, size=m).astype(np.int64)
    contexts = rng.integers(n, size=m).astype(np.int64)
    negatives = rng.integers(n, size=(m, 5)).astype(np.int64)
    lrs = np.linspace(0.025, 1e-4, m)
    w_in = rng.normal(0, 0.1, (n, d))
    w_out = rng.normal(0, 0.1, (n, d))
    return {
        "simple_walks": lambda k: k.simple_walks(g.indptr, g.indices, starts, 6, u6),
        "temporal_walks": lambda k: k.temporal_walks(g.indptr, g.indices, g.edge_time, starts, 20, u20),
        "sgns_epoch": lambda k: k.sgns_epoch(w_in.copy(), w_out.copy(), centers, contexts, negatives, lrs),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--walks-per-vertex", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inter, meta, _ = generate(SyntheticSpec(seed=args.seed))
    g = build_graph([Interaction(*r) for r in inter], [AttributeRow(*r) for r in meta])
    print(f"graph: {g.num_nodes} nodes, {len(g.indices) // 2} edges")
    if _ckernels is None:
        print("compiled kernels not built; only the fallback is timed")
    print(f"{'kernel':<16s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, fn in cases(g, args.walks_per_vertex, args.seed).items():
        tp, _ = best_of(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<16s} {tp:10.4f} {'-':>10s} {'-':>8s}")
            continue
        tc, _ = best_of(lambda: fn(_ckernels), args.repeat)
        print(f"{name:<16s} {tp:10.4f} {tc:10.4f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
