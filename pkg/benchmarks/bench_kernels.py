"""Compare the compiled and pure-Python sampling kernels.

    python benchmarks/bench_kernels.py --samples 40 --horizon 30 --repeat 5
"""

import argparse
import time

import numpy as np

from spikeplan import kernels
from spikeplan.network import (
    ContextShape, GridSpec, Logistic, StateNetwork, Trajectory, sample_spiketrains,
    set_context_for_target,
)
from spikeplan.planner import incorporate_feedback


def bench(backend, net, ctx, entry, horizon, samples, repeat):
    times = []
    for r in range(repeat):
        t0 = time.perf_counter()
        sample_spiketrains(net, ctx, entry, horizon, samples, seed=r, backend=backend)
        times.append(time.perf_counter() - t0)
    return np.array(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--neurons-per-dim", type=int, default=15)
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    grid = GridSpec(2, args.neurons_per_dim)
    net = StateNetwork.create(grid, activation=Logistic(0.5, 0.06), refractory_ramp=5)
    ctx = set_context_for_target(grid, np.array([0.6, -0.6]),
                                 ContextShape(gain=0.12, baseline=0.0), seed=0)
    entry = incorporate_feedback(Trajectory(np.array([[-0.6, -0.6]])), grid, net.tau, 1.0)

    results = {}
    for name in sorted(kernels.BACKENDS):
        bench(name, net, ctx, entry, args.horizon, 1, 1)  # warm up
        results[name] = bench(name, net, ctx, entry, args.horizon, args.samples, args.repeat)
        t = results[name]
        print(f"{name:8s} median {np.median(t) * 1e3:8.2f} ms  min {t.min() * 1e3:8.2f} ms  "
              f"({args.samples} samples x {args.horizon} steps, K={grid.n_neurons})")
    if len(results) == 2:
        print(f"speedup  {np.median(results['python']) / np.median(results['cython']):.2f}x")
    else:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
