"""Compiled versus pure-numpy kernels on representative problem sizes.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from cdde import _kernels_py, kernels
from cdde.dp import DPProblem, lattice_transitions, sup_path_integral


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def dp_case(layers, radius, dim, rng):
    axis = np.arange(-radius, radius + 1)
    ks = np.stack(np.meshgrid(*[axis] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    tr = lattice_transitions(ks, 4.0)
    weights = [rng.normal(size=len(ks)) for _ in range(layers)]
    return DPProblem(weights, [tr] * (layers - 1))


def run_dp(problem, impl):
    saved = kernels.dp_backward
    kernels.dp_backward = impl
    try:
        return sup_path_integral(problem)
    finally:
        kernels.dp_backward = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_kernels is None:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    comp = kernels.compiled_kernels
    rng = np.random.default_rng(0)
    print(f"{'kernel':<34}{'compiled [ms]':>15}{'python [ms]':>13}{'speedup':>9}  equal")
    for layers, radius, dim in ((200, 8, 1), (1000, 32, 1), (200, 4, 2), (100, 8, 2)):
        problem = dp_case(layers, radius, dim, rng)
        tc, a = best_of(lambda: run_dp(problem, comp.dp_backward), args.repeat)
        tp, b = best_of(lambda: run_dp(problem, _kernels_py.dp_backward), args.repeat)
        name = f"dp_backward L={layers} n={len(problem.weights[0])}"
        print(f"{name:<34}{1e3 * tc:>15.2f}{1e3 * tp:>13.2f}{tp / tc:>9.1f}  {a == b}")
    for T, n in ((100, 60), (400, 120)):
        values = rng.normal(size=(T, n, 1))
        points = rng.normal(size=(n, 2))
        group = np.zeros(n, dtype=np.intp)
        tc, a = best_of(lambda: comp.max_pair_quotient(values, points, group, 1e-6), args.repeat)
        tp, b = best_of(lambda: _kernels_py.max_pair_quotient(values, points, group, 1e-6), args.repeat)
        same = all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))
        name = f"max_pair_quotient T={T} n={n}"
        print(f"{name:<34}{1e3 * tc:>15.2f}{1e3 * tp:>13.2f}{tp / tc:>9.1f}  {same}")


if __name__ == "__main__":
    main()
