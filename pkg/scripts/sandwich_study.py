"""Ordering of the three transport distances on random finite spaces.

For each random pair of densities prints certified values of the
Kantorovich distance over the intrinsic metric (lower end), the dual
dynamic distance (lower bound) and the dynamic distance (upper bound).

    python3 scripts/sandwich_study.py --count 20 --seed 6
"""

import argparse

import numpy as np

from mmlab.dynamic import sandwich_check
from mmlab.space import random_density, random_space


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--nmin", type=int, default=3)
    ap.add_argument("--nmax", type=int, default=8)
    ap.add_argument("--N", type=int, default=8, help="time steps of the discrete curves")
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'#':>3} {'n':>3} {'W_dE lo':>10} {'W_E* lo':>10} {'W_E up':>10} "
          f"{'first':>7} {'second':>7}")
    fails = [0, 0]
    for k in range(args.count):
        sp = random_space(rng, int(rng.integers(args.nmin, args.nmax + 1)))
        a, b = random_density(sp, rng), random_density(sp, rng)
        rep = sandwich_check(sp, a, b, N=args.N, tol=args.tol)
        v = rep.extra
        ok = [r <= 2 * args.tol for r in rep.residuals[:2]]
        fails = [f + (not o) for f, o in zip(fails, ok)]
        print(f"{k:>3} {sp.n:>3} {v['W_dE_lower']:>10.5f} {v['W_Estar_lower']:>10.5f} "
              f"{v['W_E_upper']:>10.5f} {'ok' if ok[0] else 'VIOL':>7} "
              f"{'ok' if ok[1] else 'VIOL':>7}")
    print(f"violations: first inequality {fails[0]}/{args.count}, "
          f"second inequality {fails[1]}/{args.count}")


if __name__ == "__main__":
    main()
