"""Time the compiled kernels against the pure-Python fallback.

Runs the same forward / backward / training workload through both
backends, checks the outputs are bit-for-bit identical (the contract the
fallback exists to guarantee), and prints the speedup.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import sys
import time

import numpy as np

from variance_forge import data, net
from variance_forge._kernel import pykernels
from variance_forge.rng import derive_seed

try:
    from variance_forge._kernel import ckernels
except ImportError:
    ckernels = None


def epoch_seeds(shuffle_seed: int, epochs: int) -> np.ndarray:
    seeds = [derive_seed(shuffle_seed, "shuffle", e) for e in range(epochs)]
    return np.array(seeds, dtype=np.uint64).view(np.int64)


def clone(params):
    return [w.copy() for w in params.weights], [b.copy() for b in params.biases]


def bench(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def flatten(result):
    """Arrays from a kernel result, for bitwise comparison."""
    if isinstance(result, np.ndarray):
        return [result]
    arrays = []
    for part in result:
        if part is None or isinstance(part, int):
            continue
        if isinstance(part, np.ndarray):
            arrays.append(part)
        else:
            arrays.extend(part)
    return arrays


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    if ckernels is None:
        print("compiled backend not built; nothing to compare")
        return 1

    ds = data.gen_blobs(num_classes=3, samples_per_class=100, dims=2, spread=0.25, seed=11)
    mc = net.ModelConfig(input_dim=2, hidden_layers=(16,), output_dim=3)
    params = net.init_parameters(mc)
    x = ds.features
    y = ds.labels
    seeds = epoch_seeds(0, 60)
    act = pykernels.ACT_RELU

    workloads = {
        "forward (300x2 -> 3)": lambda k: k.forward(params.weights, params.biases, x, act),
        "backward (300 rows)": lambda k: k.backward(params.weights, params.biases, x, y, act),
        "train_sgd (60 epochs)": None,
    }

    print(f"{'kernel':<22} {'python':>10} {'cython':>10} {'speedup':>8}")
    failures = 0
    for name, call in workloads.items():
        if call is not None:
            t_py, out_py = bench(lambda: call(pykernels), args.repeats)
            t_cy, out_cy = bench(lambda: call(ckernels), args.repeats)
        else:
            def run_train(kernel):
                ws, bs = clone(params)
                code = kernel.train_sgd(ws, bs, x, y, act, seeds, 32, 0.1)
                return code, ws, bs

            t_py, out_py = bench(lambda: run_train(pykernels), args.repeats)
            t_cy, out_cy = bench(lambda: run_train(ckernels), args.repeats)

        same = all(
            np.array_equal(a, b) for a, b in zip(flatten(out_py), flatten(out_cy))
        )
        if not same:
            failures += 1
        tag = "" if same else "  MISMATCH"
        print(
            f"{name:<22} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
            f"{t_py / t_cy:>7.1f}x{tag}"
        )

    if failures:
        print(f"{failures} workload(s) disagreed between backends", file=sys.stderr)
        return 1
    print("all outputs bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
