"""Time the numba kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is run once untimed (numba compile / cache load), then timed
``--repeat`` times; the best time is reported. Outputs are checked equal.
"""

import argparse
import json
import time

import numpy as np

from grouptest.designs import gen_regular_poisson, gen_regular_regular_girth6
from grouptest.kernels import _numba, _numpy
from grouptest.simulate import sample_assignments
from grouptest._rng import make_rng


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    big = gen_regular_poisson(16384, 3693, 5, seed=1)
    x = sample_assignments(make_rng(2), 1024, big.n_variables, 2.0 ** -5)
    small = gen_regular_regular_girth6(20, 2, 10, seed=3)
    rng = np.random.default_rng(4)
    c = rng.random((65536, 8, 4)) < 0.3
    xd = rng.random((65536, 8)) < 0.2
    u = rng.random((200000, 5))
    yield "count_undetermined_batch N=16384 B=1024", lambda k: k.count_undetermined_batch(*big.arrays(), x)
    yield "exhaustive_tallies N=20", lambda k: k.exhaustive_tallies(*small.arrays(), small.n_variables)
    yield "count_undetermined_dense S=65536 N=8 M=4", lambda k: k.count_undetermined_dense(c, xd)
    yield "four_cycle_counts N=16384", lambda k: k.four_cycle_counts(*big.arrays(), big.n_variables)
    yield "sample_l_subsets N=200000 L=5 M=3693", lambda k: k.sample_l_subsets(u, 3693)


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    rows = []
    print(f"{'kernel':45s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}  equal")
    for name, call in cases():
        t_np, out_np = best_of(lambda: call(_numpy), args.repeat)
        t_nb, out_nb = best_of(lambda: call(_numba), args.repeat)
        eq = same(out_np, out_nb)
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb,
                     "speedup": t_np / t_nb, "equal": eq})
        print(f"{name:45s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}  {eq}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
