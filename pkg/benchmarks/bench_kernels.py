"""Compare the numba and numpy paths of the per-cell kernels.

Usage: python3 benchmarks/bench_kernels.py [--h 0.01] [--repeat 5]

Both paths are called directly, so the environment flag does not matter
here; the script also checks that they agree.
"""
import argparse
import time

import numpy as np

from robinlab import _kernels
from robinlab._accel import HAS_NUMBA
from robinlab.forms import cell_quadrature
from robinlab.mesh import build_polygon_mesh


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mesh = build_polygon_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], args.h)
    _, W, Phi, G = cell_quadrature(mesh, 4)
    nc, nq = W.shape
    rng = np.random.default_rng(0)
    a = np.tile(np.eye(2), (nc, nq, 1, 1))
    b = rng.normal(size=(nc, nq, 2))
    c = rng.normal(size=(nc, nq, 2))
    d = rng.uniform(size=(nc, nq))
    vals = rng.normal(size=(nc, 3))
    meas = mesh.cell_measures

    print(f"mesh: {nc} triangles, {nq} quadrature points per cell, numba available: {HAS_NUMBA}")
    cases = [
        ("local_matrices", _kernels.local_matrices_numpy, _kernels.local_matrices_numba, (G, Phi, W, a, b, c, d)),
        ("superlevel_cells", _kernels.superlevel_cells_numpy, _kernels.superlevel_cells_numba, (vals, meas, 0.3)),
    ]
    print(f"{'kernel':18s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, f_np, f_nb, fargs in cases:
        fargs = tuple(np.ascontiguousarray(v) if isinstance(v, np.ndarray) else v for v in fargs)
        out_np = f_np(*fargs)
        out_nb = f_nb(*fargs)  # first call compiles
        diff = max(float(np.max(np.abs(x - y))) for x, y in zip(out_np, out_nb))
        t_np = best_of(lambda: f_np(*fargs), args.repeat)
        t_nb = best_of(lambda: f_nb(*fargs), args.repeat)
        print(f"{name:18s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
