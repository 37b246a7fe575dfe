"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` time per call for
each backend and the speed-up.  Exits with status 1 if the extension is not
built.
"""

import argparse
import sys
import timeit

import numpy as np

from reachplan import _kernels_py as py

try:
    from reachplan import _kernels as cy
except ImportError:
    cy = None


def cases(rng):
    pts = rng.normal(size=(60, 2))
    ang = np.sort(rng.uniform(0, 2 * np.pi, 12))
    P = np.column_stack([np.cos(ang), np.sin(ang)])
    Q = P * 0.7 + [3.0, 0.5]
    x = np.array([0.1, -0.2, 0.3, 0.8, 0.1])
    u = np.array([0.1, 0.2])
    X0 = rng.normal(size=(10, 5)) * 0.3
    U = rng.normal(size=(10, 2)) * 0.1
    lf = lr = 0.08
    return {
        "hull_2d_indices (60 pts)": lambda k: k.hull_2d_indices(pts),
        "polygon_distance (12x12)": lambda k: k.polygon_distance(P, Q),
        "rk4_step": lambda k: k.rk4_step(x, u, lf, lr, 0.25),
        "rk4_step_jac": lambda k: k.rk4_step_jac(x, u, lf, lr, 0.25),
        "shoot_jac (N=10)": lambda k: k.shoot_jac(X0, U, lf, lr, 0.25),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; run pip install -e . first", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python us':>10s} {'cython us':>10s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        t = {}
        for label, mod in (("py", py), ("cy", cy)):
            best = min(timeit.repeat(lambda: fn(mod), number=args.number, repeat=args.repeat))
            t[label] = best / args.number * 1e6
        print(f"{name:28s} {t['py']:10.2f} {t['cy']:10.2f} {t['py'] / t['cy']:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
