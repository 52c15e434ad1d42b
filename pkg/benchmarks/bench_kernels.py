"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py [--nodes N] [--repeat R]``.
Prints a timing table and the maximal disagreement between backends.
"""
import argparse
import time

import numpy as np

from bergman_lab import kernels


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def box_case(n, m, k, rng):
    r = rng.uniform(0, 1, n) ** 0.25
    t = rng.uniform(-np.pi, np.pi, n)
    defects = 1 - r * np.exp(1j * t)
    weights = rng.uniform(0, 1, n)
    centers = 1 - np.exp(1j * np.linspace(-np.pi, np.pi, m, endpoint=False))
    scales = 2.0 ** -np.arange(k, 0, -1)
    return lambda backend: kernels.box_masses(defects, weights, centers, scales, threads=1, backend=backend)


def blaschke_case(n, z_count, rng):
    zeros = (1 - 2.0 ** -rng.uniform(1, 20, n)) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    z = 0.99 * np.sqrt(rng.uniform(0, 1, z_count)) * np.exp(1j * rng.uniform(-np.pi, np.pi, z_count))
    return lambda backend: kernels.blaschke_log_modulus(z, zeros, backend=backend)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=200_000)
    p.add_argument("--centers", type=int, default=512)
    p.add_argument("--scales", type=int, default=14)
    p.add_argument("--zeros", type=int, default=50)
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    cases = {"box_masses": box_case(args.nodes, args.centers, args.scales, rng),
             "blaschke_log_modulus": blaschke_case(args.zeros, args.points, rng)}
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    print(f"{'kernel':<22}{'backend':<10}{'seconds':>10}{'speedup':>10}{'max_rel_diff':>14}")
    for name, run in cases.items():
        t_py, ref = _best(lambda: run("python"), args.repeat)
        for b in backends:
            t, out = (t_py, ref) if b == "python" else _best(lambda: run(b), args.repeat)
            scale = np.maximum(np.abs(ref), 1e-300)
            diff = float(np.max(np.abs(out - ref) / scale)) if ref.size else 0.0
            print(f"{name:<22}{b:<10}{t:>10.4f}{t_py / t:>10.2f}{diff:>14.2e}")
    if kernels.BACKEND != "compiled":
        print("compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
