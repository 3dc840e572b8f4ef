"""Compiled vs numpy kernels: likelihood tables, MI maps, Adam steps.

    python3 benchmarks/bench_backends.py [--n 28] [--reps 5] [--json out.json]

Single-threaded.  Prints one line per kernel and backend, plus the speedup.
"""
import argparse
import json
import statistics
import time

import numpy as np
from threadpoolctl import threadpool_limits

from infonet import _kernels
from infonet.grid import GridSpec
from infonet.sensors import BearingSensor, FovSensor


def timeit(fn, reps, warmup=1):
    for _ in range(warmup):
        fn()
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def cases(n, headings):
    g = GridSpec(n=n, heading_bins=headings)
    tn, te = (np.ascontiguousarray(a) for a in g.flat_centers())
    hs = np.ascontiguousarray(g.headings())
    bs, fs = BearingSensor(), FovSensor()
    b = np.random.default_rng(0).dirichlet(np.ones(g.num_cells))
    p = np.random.default_rng(1).standard_normal(1_000_000).astype(np.float32)
    grad = np.random.default_rng(2).standard_normal(p.size).astype(np.float32)
    m, v = np.zeros_like(p), np.zeros_like(p)

    def run(k):
        return {
            "bearing_table": lambda: k.bearing_table(tn, te, tn, te, bs.sigma, bs.num_outcomes),
            "fov_table": lambda: k.fov_table(tn, te, hs, tn, te, fs.p_front, fs.p_rear, fs.p_side),
            "mi_map_bearing": lambda t=k.bearing_table(tn, te, tn, te, bs.sigma, bs.num_outcomes): k.mi_rows(t, b),
            "adam_1M": lambda: k.adam_update(p, grad, m, v, 0.9, 0.999, 1e-3, 1e-8),
        }
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=28)
    ap.add_argument("--headings", type=int, default=36)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()

    backends = {"python": _kernels._fallback}
    if _kernels._native is not None:
        backends["native"] = _kernels._native
    make = cases(args.n, args.headings)
    results = {}
    with threadpool_limits(limits=1):
        for name, mod in backends.items():
            for kernel, fn in make(mod).items():
                results.setdefault(kernel, {})[name] = timeit(fn, args.reps)
    for kernel, r in results.items():
        line = "  ".join(f"{k} {v * 1e3:9.2f} ms" for k, v in r.items())
        if "native" in r:
            line += f"  speedup {r['python'] / r['native']:6.1f}x"
        print(f"{kernel:16s} {line}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"n": args.n, "headings": args.headings, "reps": args.reps, "seconds": results}, fh, indent=2)


if __name__ == "__main__":
    main()
