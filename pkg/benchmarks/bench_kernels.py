"""Time the numba and numpy versions of the pair-sum kernels.

    python benchmarks/bench_kernels.py [--grid 32] [--repeat 3]

Prints one line per kernel and backend plus the max difference between the
two results.  The first numba call (compilation) is excluded from the timing.
"""

import argparse
import time

import numpy as np

from bogotool import _kernels
from bogotool._accel import HAVE_NUMBA
from bogotool.bogovskii import Cube, cube_grid, preset_family
from bogotool.mollifier import make_mollifier


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--order", type=int, default=16)
    args = ap.parse_args()

    cube = Cube((0.5, 0.5), 1.0)
    g = cube_grid(cube, args.grid)
    pts = g.coords().reshape(-1, 2)
    fam = preset_family(cube, args.grid)
    fv = np.stack([f.values.ravel() for f in fam.values()])
    moll = make_mollifier(2)
    R, amp = moll.radius, moll.c_norm
    eps = np.array([2.0**-k for k in range(7, 2, -1)])

    cases = {
        "bogovskii_sum": lambda nb: _kernels.bogovskii_sum(pts, pts, fv, cube.center, R, amp, args.order,
                                                           g.cell_volume, use_numba=nb),
        "cz_sum(riesz)": lambda nb: _kernels.cz_sum(pts, pts, fv, eps, _kernels.RIESZ, 0, g.cell_volume,
                                                    use_numba=nb),
    }
    print(f"grid {args.grid}x{args.grid}, {len(pts)} points, {fv.shape[0]} fields")
    for name, run in cases.items():
        t_np, ref = best_of(lambda: run(False), args.repeat)
        line = f"{name:16s} numpy {t_np:8.3f}s"
        if HAVE_NUMBA:
            run(True)  # compile
            t_nb, out = best_of(lambda: run(True), args.repeat)
            line += f"   numba {t_nb:8.3f}s   speedup {t_np / t_nb:6.1f}x   max diff {np.max(np.abs(out - ref)):.2e}"
        print(line)


if __name__ == "__main__":
    main()
