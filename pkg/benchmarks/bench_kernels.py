"""Compiled vs numpy geometry kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel and backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from rivertraj import _pykernels

try:
    from rivertraj import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    pos = np.cumsum(rng.uniform(-300, 300, (20000, 27, 2)), axis=1)
    seed, dist, change = _pykernels.steps_batch(pos)
    verts = np.cumsum(rng.uniform(1, 15, (8000, 2)), axis=0)
    pts = verts[rng.integers(0, len(verts), 5000)] + rng.normal(0, 40, (5000, 2))
    a, b = rng.uniform(0, 360, (2, 1_000_000))
    return {
        "cog_diff (1e6 pairs)": lambda k: k.cog_diff(a, b),
        "steps_batch (20000 x 27)": lambda k: k.steps_batch(pos),
        "reconstruct_batch (20000 x 26)": lambda k: k.reconstruct_batch(pos[:, 0], seed, dist, change),
        "project_to_polyline (5000 pts, 8000 verts)": lambda k: k.project_to_polyline(pts, verts),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:45s} {py * 1e3:8.1f}ms {'n/a':>10s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:45s} {py * 1e3:8.1f}ms {cy * 1e3:8.1f}ms {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
