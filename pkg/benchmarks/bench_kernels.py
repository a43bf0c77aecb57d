"""Time the numba and numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--reps 3] [--length 50 100 200]

Both backends must give identical results; the script checks that before
reporting timings.  The first numba call (JIT compile) is excluded.
"""

import argparse
import random
import time

from pcnlab import _kernels
from pcnlab.core import CostParams
from pcnlab.generators import StreamConfig, sample_stream
from pcnlab.netgraph import ChannelGraph, cycle_histogram
from pcnlab.offline import dp_solve


def _best(fn, reps):
    out, best = None, float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def _random_graph(n, m, seed):
    rng = random.Random(seed)
    return ChannelGraph.from_edges((rng.randrange(n), rng.randrange(n)) for _ in range(m))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--length", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--edges", type=int, default=8000)
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])
    params = CostParams(R=0, f1=3, f2=2, C=4)
    if "numba" in backends:  # warm the JIT
        dp_solve(sample_stream(StreamConfig(length=5)), params, backend="numba")
        cycle_histogram(_random_graph(10, 20, 0), backend="numba")

    print(f"{'kernel':<22}{'numpy s':>10}{'numba s':>10}{'speedup':>9}")
    for length in args.length:
        s = sample_stream(StreamConfig(3.0, 0.5, length, 1))
        res = {b: _best(lambda b=b: dp_solve(s, params, backend=b), args.reps) for b in backends}
        _report(f"dp t={length}", res, lambda sol: sol.total_cost)

    g = _random_graph(args.nodes, args.edges, 1)
    res = {b: _best(lambda b=b: cycle_histogram(g, backend=b), args.reps) for b in backends}
    _report(f"bfs n={args.nodes} m={len(g.edges)}", res, lambda h: (h.counts, h.not_in_cycle))


def _report(name, res, key):
    vals = {b: key(out) for b, (out, _) in res.items()}
    if len(set(map(repr, vals.values()))) != 1:
        raise SystemExit(f"{name}: backends disagree: {vals}")
    t_np = res["numpy"][1]
    if "numba" in res:
        t_nb = res["numba"][1]
        print(f"{name:<22}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x")
    else:
        print(f"{name:<22}{t_np:>10.4f}{'n/a':>10}{'':>9}")


if __name__ == "__main__":
    main()
