"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--cars 50] [--steps 2000] [--bins 200]

Each kernel is run on identical inputs by both backends; the outputs are
checked for bit equality before timing.
"""

import argparse
import sys
import timeit

import numpy as np

from pwlcf import _kernels_py
from pwlcf._backend import compiled_kernels
from pwlcf.dynamics import AnticipationConfig, LeaderProfile
from pwlcf.law import inverse_spacing, six_segment_law


def simulate_case(cars, steps, m):
    law = six_segment_law()
    la, lb, ua, ub = law.arrays
    x0 = (cars - 1 - np.arange(cars)) * inverse_spacing(law, 10.0)
    lead = LeaderProfile.parse("0:10,40:2,80:10").speeds(steps)
    disc = AnticipationConfig(m, 0.0).discounts()
    return (x0, steps, la, lb, ua, ub, m, disc, False, False, 0.0, lead)


def dp_case(bins, seed=0):
    rng = np.random.default_rng(seed)
    cnt = rng.integers(5, 200, bins).astype(np.float64)
    my = np.arange(bins) + 0.5
    mv = np.minimum(0.5 * my, 12.0)
    cyy = cnt / 12.0
    cyv = 0.3 * cyy
    cvv = 0.09 * cyy + 0.01 * cnt
    return (cnt, my, mv, cyy, cyv, cvv)


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--cars", type=int, default=50)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--bins", type=int, default=200)
    args = ap.parse_args(argv)

    ck = compiled_kernels()
    if ck is None:
        print("compiled kernels not built; only the numpy fallback is available", file=sys.stderr)
        return 1

    sim = simulate_case(args.cars, args.steps, args.m)
    dp = dp_case(args.bins)
    cost = _kernels_py.cost_matrix(*dp)
    phi = 5.0

    # parity first: a fast wrong answer is not a result
    assert np.array_equal(_kernels_py.simulate(*sim), np.asarray(ck.simulate(*sim)))
    assert np.array_equal(cost, np.asarray(ck.cost_matrix(*dp)))
    assert np.array_equal(_kernels_py.partition(cost, phi)[0], np.asarray(ck.partition(cost, phi)[0]))

    rows = [
        (f"simulate {args.cars} cars x {args.steps} steps, m={args.m}",
         lambda: _kernels_py.simulate(*sim), lambda: ck.simulate(*sim)),
        (f"cost_matrix {args.bins} bins",
         lambda: _kernels_py.cost_matrix(*dp), lambda: ck.cost_matrix(*dp)),
        (f"partition {args.bins} bins",
         lambda: _kernels_py.partition(cost, phi), lambda: ck.partition(cost, phi)),
    ]
    print(f"{'kernel':<40} {'numpy (s)':>11} {'cython (s)':>11} {'speedup':>8}")
    for name, py, cy in rows:
        tp, tc = best_of(py, args.repeat), best_of(cy, args.repeat)
        print(f"{name:<40} {tp:>11.4f} {tc:>11.4f} {tp / tc:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
