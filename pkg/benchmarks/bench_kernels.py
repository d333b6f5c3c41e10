"""Compare the compiled and pure-Python mesh closest-point kernels.

Usage: python benchmarks/bench_kernels.py [--subdivisions 4] [--queries 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from cpschwarz import _pykernels
from cpschwarz.geometry import TriMesh, icosphere

try:
    from cpschwarz import _ckernels
except ImportError:
    _ckernels = None


def run(mod, mesh, X):
    ix = mesh.index
    return mod.closest_points_mesh(X, mesh.vertices, mesh.triangles, ix.lo, ix.hi,
                                   ix.left, ix.right, ix.start, ix.count, ix.order)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--subdivisions", type=int, default=4, help="icosphere level (20*4^k triangles)")
    ap.add_argument("--queries", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    mesh = TriMesh(*icosphere(args.subdivisions))
    rng = np.random.default_rng(args.seed)
    # queries in a shell around the surface, like band nodes
    X = rng.normal(size=(args.queries, 3))
    X *= (1.0 + rng.uniform(-0.3, 0.3, size=(args.queries, 1))) / np.linalg.norm(X, axis=1, keepdims=True)
    X = np.ascontiguousarray(X)
    print(f"mesh: {len(mesh.triangles)} triangles, BVH {mesh.index.n_nodes} nodes; {args.queries} queries")

    t_py, ref = best_time(lambda: run(_pykernels, mesh, X), args.repeat)
    print(f"python : {t_py:9.4f} s  ({args.queries / t_py:12.0f} queries/s)")
    if _ckernels is None:
        print("cython : extension not built")
        return 0
    t_c, out = best_time(lambda: run(_ckernels, mesh, X), args.repeat)
    print(f"cython : {t_c:9.4f} s  ({args.queries / t_c:12.0f} queries/s)")
    print(f"speedup: {t_py / t_c:9.1f}x")
    diff = np.abs(out[1] - ref[1]).max()
    print(f"max squared-distance difference between backends: {diff:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
