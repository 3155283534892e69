"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 2048] [--p 16] [--repeat 3] [--json out.json]

Each kernel is run on identical inputs under both backends; the table reports
the best-of-``repeat`` wall clock, the speedup and the max abs difference.
"""

import argparse
import json
import sys
import time

import numpy as np

from bbis._backend import available_backends


def cases(n, p, rng):
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((4 * n, p))
    lg = -0.5 * np.sum(x * x, axis=1)
    sq = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
    w = rng.dirichlet(np.ones(n))
    m = 2 * n
    a = rng.integers(0, m, size=20 * n).astype(np.int64)
    b = (a + 1 + rng.integers(0, m - 1, size=a.size)) % m
    v = rng.standard_normal(n)
    L = np.linalg.cholesky(np.eye(p) + 0.1 * np.ones((p, p)))
    u = 0.3 * rng.standard_normal(p)
    return {
        "sq_dists": lambda k: k.sq_dists(x, 1),
        "energy_log_matrix": lambda k: k.energy_log_matrix(lg, sq, p, 1.0, 0.01, 1),
        "stein_matrix": lambda k: k.stein_matrix(x, -x, 1.5, 1),
        "row_distance_sums": lambda k: k.row_distance_sums(x, y, 1),
        "weighted_self_distance": lambda k: k.weighted_self_distance(x, w, 1),
        "pair_distance_sum": lambda k: k.pair_distance_sum(y[: 2 * n], 1),
        "sampled_pair_distances": lambda k: k.sampled_pair_distances(y[:m], a, b.astype(np.int64), 1),
        "loo_log_kernel_sums": lambda k: k.loo_log_kernel_sums(x, 0.7, 1),
        "project_simplex": lambda k: k.project_simplex(v),
        "chol_rank1": lambda k: k.chol_rank1(L, u, -0.2),
    }


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--p", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available", file=sys.stderr)
    rows = []
    for name, fn in cases(args.n, args.p, np.random.default_rng(args.seed)).items():
        row = {"kernel": name}
        outs = {}
        for bname, mod in backends.items():
            row[bname], outs[bname] = best_time(lambda: fn(mod), args.repeat)
        if len(outs) == 2:
            row["speedup"] = row["python"] / row["compiled"]
            row["max_abs_diff"] = max_diff(outs["python"], outs["compiled"])
        rows.append(row)

    print(f"n={args.n} p={args.p} best of {args.repeat}")
    print(f"{'kernel':<24}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max |diff|':>12}")
    for r in rows:
        print(f"{r['kernel']:<24}{r['python']:>12.4g}{r.get('compiled', float('nan')):>14.4g}"
              f"{r.get('speedup', float('nan')):>10.2f}{r.get('max_abs_diff', float('nan')):>12.2g}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"n": args.n, "p": args.p, "repeat": args.repeat, "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
