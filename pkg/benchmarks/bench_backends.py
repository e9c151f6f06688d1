"""Time the numba and numpy kernel backends on the same estimation problems.

Usage::

    python3 benchmarks/bench_backends.py [--sizes 16,36,64,144] [--repeats 3]

Each problem is a grid-graph DDGL ground truth with k/n = 30 samples,
estimated as GGL with the full mask and as DDGL with the true mask (which
exercises the refinement sweeps).  The first numba call per process pays
for JIT compilation (or cache loading); a warm-up run absorbs it.
"""

import argparse
import time
import warnings

import numpy as np

from laplace_learn import kernels
from laplace_learn.core import ConnectivityMask, build_statistic
from laplace_learn.ggl import EstimatorConfig, estimate_ggl
from laplace_learn.synthetic import GraphSpec, generate_graph, sample_gmrf, trial_rng


def problem(n, seed=0):
    theta, mask = generate_graph(GraphSpec("grid", n), trial_rng(seed, 0))
    s = build_statistic(sample_gmrf(theta, 30 * n, trial_rng(seed, 1)))
    return s, mask


def run(s, mask, target):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return estimate_ggl(s, mask, 0.0, EstimatorConfig(target_class=target))


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,36,64,144")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(v) for v in args.sizes.split(",")]
    backends = [b for b in ("numba", "numpy") if b in kernels.BACKENDS]

    s0, m0 = problem(16)
    for b in backends:
        with kernels.use_backend(b):
            run(s0, m0, "DDGL")

    print(f"{'n':>5} {'case':<16}" + "".join(f"{b + ' [s]':>14}" for b in backends) + f"{'speedup':>10}")
    for n in sizes:
        s, mask = problem(n)
        cases = [("GGL full mask", ConnectivityMask.full(n), "GGL"), ("DDGL true mask", mask, "DDGL")]
        for label, a, target in cases:
            times, thetas = [], []
            for b in backends:
                with kernels.use_backend(b):
                    t, res = best_time(lambda: run(s, a, target), args.repeats)
                times.append(t)
                thetas.append(res.theta.theta)
            row = f"{n:>5} {label:<16}" + "".join(f"{t:>14.4f}" for t in times)
            if len(times) == 2:
                gap = np.max(np.abs(thetas[0] - thetas[1]))
                row += f"{times[1] / times[0]:>9.1f}x  (max |diff| {gap:.1e})"
            print(row)


if __name__ == "__main__":
    main()
