"""Compare the compiled and pure-numpy kernel backends.

Runs the forward and backward pass over a batch of random bags with both
implementations, reports per-step wall time and the speedup, and checks
that the two backends agree to near machine precision.

Usage: python3 benchmarks/bench_backends.py [--frames J] [--embed-dim D] [--repeats N]
"""

import argparse
import time

import numpy as np

from weakagg import aggregator
from weakagg.aggregator import ModelConfig


def _time_backend(kernels, cases, repeats):
    def run_all():
        outs = []
        for frames, params, target in cases:
            cache = kernels.forward(frames, *params)
            outs.append(kernels.backward(frames, *cache[:6], cache[7], target,
                                         params[2], params[4], params[5], params[7]))
        return outs

    run_all()  # warm-up (triggers compilation for the jit backend)
    best = float("inf")
    grads = None
    for _ in range(repeats):
        started = time.perf_counter()
        grads = run_all()
        best = min(best, (time.perf_counter() - started) / len(cases))
    return best, grads


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=16)
    parser.add_argument("--embed-dim", type=int, default=256)
    parser.add_argument("--bags", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    from weakagg import _kernels_np
    try:
        from weakagg import _kernels_nb
    except ImportError as exc:
        parser.exit(1, f"compiled backend unavailable: {exc}\n")

    config = ModelConfig(embed_dim=args.embed_dim)
    rng = np.random.default_rng(args.seed)
    cases = []
    for i in range(args.bags):
        params = aggregator.init_params(config, args.seed + i)
        frames = rng.standard_normal((args.frames, config.embed_dim))
        target = rng.uniform(size=2)
        cases.append((frames, tuple(getattr(params, name) for name in aggregator.FLATTEN_ORDER),
                      target))

    np_time, np_grads = _time_backend(_kernels_np, cases, args.repeats)
    nb_time, nb_grads = _time_backend(_kernels_nb, cases, args.repeats)

    worst = 0.0
    for a, b in zip(np_grads, nb_grads):
        for ga, gb in zip(a, b):
            worst = max(worst, float(np.max(np.abs(np.asarray(ga) - np.asarray(gb)))))

    print(f"bags={args.bags} frames={args.frames} embed_dim={args.embed_dim} "
          f"repeats={args.repeats}")
    print(f"numpy   forward+backward: {np_time * 1e6:9.1f} us/bag")
    print(f"numba   forward+backward: {nb_time * 1e6:9.1f} us/bag")
    print(f"speedup: {np_time / nb_time:.2f}x")
    print(f"max gradient difference: {worst:.3e}")


if __name__ == "__main__":
    main()
